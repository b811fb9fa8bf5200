use super::state::Who;
use super::{Dest, HandlerOutput, Mode, SEState, Sender, RESUME};
use crate::error::ProtocolError;
use crate::messages::{classify_opcode, Message, OpClass, Opcode};
use crate::topology::CoreId;

impl SEState {
    pub(super) fn lock_master(
        &mut self,
        st: &mut super::VarState,
        who: Who,
        m: Message,
        out: &mut HandlerOutput,
    ) -> Result<(), ProtocolError> {
        match classify_opcode(m.opcode) {
            OpClass::Acquire | OpClass::OverflowAcquire => {
                if st.contains(who) {
                    return Err(self.err(&m, format!("{who:?} requested a lock it already waits on or holds")));
                }
                st.add(self.units(), who);
                if m.info & RESUME != 0 {
                    st.mark_resume(self.units(), who);
                }
                if st.owner().is_none() {
                    self.lock_grant(st, who, m.addr, out);
                }
                Ok(())
            }
            OpClass::Release | OpClass::OverflowRelease => {
                if st.owner() != Some(who) {
                    return Err(self.err(&m, format!("release by {who:?}, owner is {:?}", st.owner())));
                }
                st.remove(who);
                st.set_owner(None);
                if let Some(next) = self.pick(st) {
                    self.lock_grant(st, next, m.addr, out);
                }
                Ok(())
            }
            _ => Err(self.err(&m, "unexpected lock opcode at master")),
        }
    }

    fn lock_grant(&mut self, st: &mut super::VarState, who: Who, addr: u64, out: &mut HandlerOutput) {
        st.set_owner(Some(who));
        self.note_grant(st, who);
        let resume = st.take_resume(who);
        let core_op = if resume { Opcode::CondGrantLocal } else { Opcode::LockGrantLocal };
        match who {
            Who::Own(c) => out.send(self.core(self.unit, c), self.msg(addr, core_op, c as u8, 0)),
            Who::Se(s) => out.send(Dest::Se(s), self.msg(addr, Opcode::LockGrantGlobal, self.id as u8, 0)),
            Who::Remote { unit, local } => {
                if self.remote_via_se() {
                    let info = if resume { RESUME } else { 0 };
                    out.send(
                        Dest::Se(unit),
                        self.msg(addr, Opcode::LockGrantOverflow, self.pack(unit, local), info),
                    );
                } else {
                    out.send(self.core(unit, local), self.msg(addr, core_op, local as u8, 0));
                }
            }
        }
    }

    /// Lock handling at an SE that is not the lock's master: local waiters
    /// are served while this SE holds the lock on behalf of its unit.
    pub(super) fn lock_local(
        &mut self,
        st: &mut super::VarState,
        from: Sender,
        m: Message,
        out: &mut HandlerOutput,
    ) -> Result<(), ProtocolError> {
        debug_assert_eq!(self.mode, Mode::Hierarchical);
        match (m.opcode, from) {
            (Opcode::LockAcquireLocal, Sender::Core(CoreId { local: c, .. })) => {
                let who = Who::Own(c);
                if st.contains(who) {
                    return Err(self.err(&m, format!("core {c} requested a lock it already waits on or holds")));
                }
                st.add(self.units(), who);
                if m.info & RESUME != 0 {
                    st.mark_resume(self.units(), who);
                }
                if st.has_rights {
                    if st.owner().is_none() {
                        self.grant_local_next(st, m.addr, out);
                    }
                } else if !st.requested {
                    st.requested = true;
                    let master = self.master_of(m.addr);
                    out.send(
                        Dest::Se(master),
                        self.msg(m.addr, Opcode::LockAcquireGlobal, self.id as u8, 0),
                    );
                }
                Ok(())
            }
            (Opcode::LockGrantGlobal, Sender::Se(_)) => {
                if !st.requested || st.has_rights {
                    return Err(self.err(&m, "unsolicited global lock grant"));
                }
                st.requested = false;
                st.has_rights = true;
                if st.own == 0 {
                    return Err(self.err(&m, "global lock grant with no local waiter"));
                }
                self.grant_local_next(st, m.addr, out);
                Ok(())
            }
            (Opcode::LockReleaseLocal, Sender::Core(CoreId { local: c, .. })) => {
                if !st.has_rights || st.owner() != Some(Who::Own(c)) {
                    return Err(self.err(&m, format!("release by core {c}, owner is {:?}", st.owner())));
                }
                st.remove(Who::Own(c));
                st.set_owner(None);
                if st.own != 0 {
                    self.grant_local_next(st, m.addr, out);
                } else {
                    st.has_rights = false;
                    let master = self.master_of(m.addr);
                    out.send(
                        Dest::Se(master),
                        self.msg(m.addr, Opcode::LockReleaseGlobal, self.id as u8, 0),
                    );
                }
                Ok(())
            }
            _ => Err(self.err(&m, "unexpected lock message at non-master SE")),
        }
    }

    fn grant_local_next(&mut self, st: &mut super::VarState, addr: u64, out: &mut HandlerOutput) {
        let Some(c) = super::state::lowest(st.own) else {
            return;
        };
        let who = Who::Own(c);
        st.set_owner(Some(who));
        let op = if st.take_resume(who) { Opcode::CondGrantLocal } else { Opcode::LockGrantLocal };
        out.send(self.core(self.unit, c), self.msg(addr, op, c as u8, 0));
    }
}
