use super::state::{lowest, VarState, Who};
use super::{bit, Dest, HandlerOutput, Mode, SEState, Sender, RESUME};
use crate::error::ProtocolError;
use crate::messages::{Message, Opcode};
use crate::topology::CoreId;

impl SEState {
    fn cond_check_lock(&self, st: &mut VarState, lock: u64, m: &Message) -> Result<(), ProtocolError> {
        match st.cond_lock {
            None => {
                st.cond_lock = Some(lock);
                Ok(())
            }
            Some(l) if l == lock => Ok(()),
            Some(l) => Err(self.err(m, format!("condition variable used with lock {lock:#x} and {l:#x}"))),
        }
    }

    /// Releases `lock` on behalf of `core` as part of a condition wait.
    fn cond_release_lock(&mut self, core: CoreId, lock: u64, out: &mut HandlerOutput) -> Result<(), ProtocolError> {
        let rel = self.msg(lock, Opcode::LockReleaseLocal, core.local as u8, 0);
        if self.mode == Mode::Flat && !self.is_master(lock) {
            return Err(self.err(&rel, "condition variable and its lock have different masters"));
        }
        self.dispatch(Sender::Core(core), rel, out)
    }

    /// Re-acquires `lock` for a woken waiter; the grant completes its wait.
    fn cond_reacquire(&mut self, core: CoreId, lock: u64, out: &mut HandlerOutput) -> Result<(), ProtocolError> {
        let acq = self.msg(lock, Opcode::LockAcquireLocal, core.local as u8, RESUME);
        if self.mode == Mode::Flat && !self.is_master(lock) {
            return Err(self.err(&acq, "condition variable and its lock have different masters"));
        }
        self.dispatch(Sender::Core(core), acq, out)
    }

    pub(super) fn cond_master(
        &mut self,
        st: &mut VarState,
        who: Who,
        m: Message,
        out: &mut HandlerOutput,
    ) -> Result<(), ProtocolError> {
        use Opcode::*;
        match m.opcode {
            CondWaitLocal | CondWaitGlobal | CondWaitOverflow => {
                self.cond_check_lock(st, m.info, &m)?;
                if st.contains(who) {
                    return Err(self.err(&m, format!("{who:?} waits twice on a condition variable")));
                }
                st.add(self.units(), who);
                if m.opcode == CondWaitLocal {
                    let core = self.core_of(who).expect("core requester");
                    self.cond_release_lock(core, m.info, out)?;
                }
                Ok(())
            }
            CondSignalLocal | CondSignalGlobal | CondSignalOverflow => {
                if let Some(w) = self.pick(st) {
                    self.cond_wake(st, w, false, m.addr, out)?;
                }
                Ok(())
            }
            CondBroadLocal | CondBroadGlobal | CondBroadOverflow => {
                while let Some(w) = self.pick(st) {
                    self.cond_wake(st, w, true, m.addr, out)?;
                }
                Ok(())
            }
            _ => Err(self.err(&m, "unexpected condition variable opcode at master")),
        }
    }

    fn cond_wake(
        &mut self,
        st: &mut VarState,
        who: Who,
        broadcast: bool,
        addr: u64,
        out: &mut HandlerOutput,
    ) -> Result<(), ProtocolError> {
        st.remove(who);
        self.note_grant(st, who);
        let lock = st.cond_lock.unwrap_or(0);
        match who {
            Who::Se(s) => {
                let op = if broadcast { Opcode::CondBroadGlobal } else { Opcode::CondGrantGlobal };
                out.send(Dest::Se(s), self.msg(addr, op, self.id as u8, lock));
                Ok(())
            }
            Who::Remote { unit, local } if self.remote_via_se() => {
                out.send(
                    Dest::Se(unit),
                    self.msg(addr, Opcode::CondGrantOverflow, self.pack(unit, local), lock),
                );
                Ok(())
            }
            _ => {
                let core = self.core_of(who).expect("core waiter");
                self.cond_reacquire(core, lock, out)
            }
        }
    }

    /// Condition waits at an SE that is not the master: the SE registers
    /// once with the master and wakes its own waiters on each grant.
    pub(super) fn cond_local(
        &mut self,
        st: &mut VarState,
        from: Sender,
        m: Message,
        out: &mut HandlerOutput,
    ) -> Result<(), ProtocolError> {
        use Opcode::*;
        let master = Dest::Se(self.master_of(m.addr));
        match (m.opcode, from) {
            (CondWaitLocal, Sender::Core(core)) => {
                self.cond_check_lock(st, m.info, &m)?;
                let c = core.local;
                if st.own & bit(c) != 0 {
                    return Err(self.err(&m, format!("core {c} waits twice on a condition variable")));
                }
                if !st.requested {
                    st.requested = true;
                    out.send(master, self.msg(m.addr, CondWaitGlobal, self.id as u8, m.info));
                }
                st.own |= bit(c);
                self.cond_release_lock(core, m.info, out)
            }
            (CondGrantGlobal, Sender::Se(_)) => {
                let c = lowest(st.own).ok_or_else(|| self.err(&m, "condition grant with no local waiter"))?;
                st.own &= !bit(c);
                let lock = st.cond_lock.unwrap_or(m.info);
                self.cond_reacquire(CoreId::new(self.unit, c), lock, out)?;
                if st.own != 0 {
                    out.send(master, self.msg(m.addr, CondWaitGlobal, self.id as u8, lock));
                } else {
                    st.requested = false;
                }
                Ok(())
            }
            (CondBroadGlobal, Sender::Se(_)) => {
                let lock = st.cond_lock.unwrap_or(m.info);
                let mut own = std::mem::take(&mut st.own);
                st.requested = false;
                while let Some(c) = lowest(own) {
                    own &= own - 1;
                    self.cond_reacquire(CoreId::new(self.unit, c), lock, out)?;
                }
                Ok(())
            }
            _ => Err(self.err(&m, "unexpected condition variable message at non-master SE")),
        }
    }
}
