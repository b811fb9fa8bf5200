use super::state::{lowest, ensure_len, VarState, Who};
use super::{bit, Dest, HandlerOutput, SEState, Sender};
use crate::error::ProtocolError;
use crate::messages::{Level, Message, Opcode};
use crate::topology::CoreId;

/// Info field of SE-to-SE semaphore messages: declared initial value in the
/// upper half, a count in the lower half.
pub fn pack(initial: u64, count: u64) -> u64 {
    (initial << 32) | (count & 0xffff_ffff)
}

pub fn unpack(info: u64) -> (u64, u64) {
    (info >> 32, info & 0xffff_ffff)
}

impl SEState {
    fn sem_check_initial(&self, st: &mut VarState, initial: u64, m: &Message) -> Result<(), ProtocolError> {
        match st.initial {
            None => {
                st.initial = Some(initial);
                st.info = initial;
                Ok(())
            }
            Some(i) if i == initial => Ok(()),
            Some(i) => Err(self.err(m, format!("initial value {initial} differs from {i}"))),
        }
    }

    pub(super) fn sem_master(
        &mut self,
        st: &mut VarState,
        who: Who,
        m: Message,
        out: &mut HandlerOutput,
    ) -> Result<(), ProtocolError> {
        use Opcode::*;
        let (initial, n) = if m.opcode.level() == Level::Local {
            (m.info, 1)
        } else {
            unpack(m.info)
        };
        self.sem_check_initial(st, initial, &m)?;
        match m.opcode {
            SemWaitLocal | SemWaitGlobal | SemWaitOverflow => match who {
                Who::Se(s) => {
                    ensure_len(&mut st.demand, self.units());
                    st.demand[s] += n;
                    st.se_level |= bit(s);
                }
                _ => {
                    if st.contains(who) {
                        return Err(self.err(&m, format!("{who:?} waits twice on a semaphore")));
                    }
                    st.add(self.units(), who);
                }
            },
            SemPostLocal | SemPostGlobal | SemPostOverflow => {
                st.info = st
                    .info
                    .checked_add(n)
                    .filter(|v| *v < 1 << 32)
                    .ok_or_else(|| self.err(&m, "semaphore counter overflow"))?;
            }
            _ => return Err(self.err(&m, "unexpected semaphore opcode at master")),
        }
        while st.info > 0 {
            let Some(next) = self.pick(st) else { break };
            self.sem_grant(st, next, m.addr, out);
        }
        Ok(())
    }

    fn sem_grant(&mut self, st: &mut VarState, who: Who, addr: u64, out: &mut HandlerOutput) {
        self.note_grant(st, who);
        match who {
            Who::Se(s) => {
                let g = st.info.min(st.demand[s]);
                st.demand[s] -= g;
                st.info -= g;
                if st.demand[s] == 0 {
                    st.se_level &= !bit(s);
                }
                out.send(Dest::Se(s), self.msg(addr, Opcode::SemGrantGlobal, self.id as u8, g));
            }
            Who::Own(c) => {
                st.remove(who);
                st.info -= 1;
                out.send(self.core(self.unit, c), self.msg(addr, Opcode::SemGrantLocal, c as u8, 1));
            }
            Who::Remote { unit, local } => {
                st.remove(who);
                st.info -= 1;
                if self.remote_via_se() {
                    out.send(
                        Dest::Se(unit),
                        self.msg(addr, Opcode::SemGrantOverflow, self.pack(unit, local), 1),
                    );
                } else {
                    out.send(self.core(unit, local), self.msg(addr, Opcode::SemGrantLocal, local as u8, 1));
                }
            }
        }
    }

    /// Semaphore waits at an SE that is not the master: waiters are batched
    /// into one global request per round trip.
    pub(super) fn sem_local(
        &mut self,
        st: &mut VarState,
        from: Sender,
        m: Message,
        out: &mut HandlerOutput,
    ) -> Result<(), ProtocolError> {
        match (m.opcode, from) {
            (Opcode::SemWaitLocal, Sender::Core(CoreId { local: c, .. })) => {
                match st.initial {
                    None => st.initial = Some(m.info),
                    Some(i) if i == m.info => {}
                    Some(i) => return Err(self.err(&m, format!("initial value {} differs from {i}", m.info))),
                }
                if st.own & bit(c) != 0 {
                    return Err(self.err(&m, format!("core {c} waits twice on a semaphore")));
                }
                st.own |= bit(c);
                self.sem_request_more(st, m.addr, out);
                Ok(())
            }
            (Opcode::SemGrantGlobal, Sender::Se(_)) => {
                if m.info > st.pending {
                    return Err(self.err(&m, "granted more than requested"));
                }
                for _ in 0..m.info {
                    let c = lowest(st.own).ok_or_else(|| self.err(&m, "grant with no local waiter"))?;
                    st.own &= !bit(c);
                    out.send(self.core(self.unit, c), self.msg(m.addr, Opcode::SemGrantLocal, c as u8, 1));
                }
                st.pending -= m.info;
                self.sem_request_more(st, m.addr, out);
                Ok(())
            }
            _ => Err(self.err(&m, "unexpected semaphore message at non-master SE")),
        }
    }

    fn sem_request_more(&mut self, st: &mut VarState, addr: u64, out: &mut HandlerOutput) {
        let queued = st.own.count_ones() as u64;
        if st.pending == 0 && queued > 0 {
            st.pending = queued;
            let initial = st.initial.unwrap_or(0);
            out.send(
                Dest::Se(self.master_of(addr)),
                self.msg(addr, Opcode::SemWaitGlobal, self.id as u8, pack(initial, queued)),
            );
        }
    }
}
