use super::state::{lowest, BarrierKind, VarState, Who};
use super::{Dest, HandlerOutput, SEState, Sender};
use crate::error::ProtocolError;
use crate::messages::{Message, Opcode};
use crate::topology::CoreId;

impl SEState {
    fn barrier_check_total(&self, st: &mut VarState, m: &Message) -> Result<(), ProtocolError> {
        match st.barrier_total {
            None => {
                if m.info == 0 {
                    return Err(self.err(m, "barrier with zero participants"));
                }
                st.barrier_total = Some(m.info);
                Ok(())
            }
            Some(t) if t == m.info => Ok(()),
            Some(t) => Err(self.err(m, format!("participant count {} differs from {t}", m.info))),
        }
    }

    pub(super) fn barrier_master(
        &mut self,
        st: &mut VarState,
        who: Who,
        m: Message,
        out: &mut HandlerOutput,
    ) -> Result<(), ProtocolError> {
        use Opcode::*;
        if !matches!(
            m.opcode,
            BarrierWaitLocalWithinUnit | BarrierWaitLocalAcrossUnits | BarrierWaitGlobal | BarrierWaitOverflow
        ) {
            return Err(self.err(&m, "unexpected barrier opcode at master"));
        }
        self.barrier_check_total(st, &m)?;
        if m.opcode != BarrierWaitOverflow {
            st.barrier_kind = self.barrier_kind_of(&m);
        }
        if st.contains(who) {
            return Err(self.err(&m, format!("{who:?} arrived twice at the same barrier episode")));
        }
        let weight = match who {
            Who::Se(_) => self.cfg.clients_per_unit as u64,
            _ => 1,
        };
        st.add(self.units(), who);
        st.info += weight;
        let total = st.barrier_total.unwrap_or(0);
        if st.info > total {
            return Err(self.err(&m, "more arrivals than participants"));
        }
        if st.info == total {
            self.barrier_depart_all(st, m.addr, out);
        }
        Ok(())
    }

    fn barrier_depart_all(&mut self, st: &mut VarState, addr: u64, out: &mut HandlerOutput) {
        let depart = |c: usize| Message::new(addr, Opcode::BarrierDepartLocal, c as u8, 0);
        let mut own = st.own;
        while let Some(c) = lowest(own) {
            own &= own - 1;
            out.send(self.core(self.unit, c), depart(c));
        }
        for u in 0..self.units() {
            if st.se_level & super::bit(u) != 0 {
                out.send(Dest::Se(u), self.msg(addr, Opcode::BarrierDepartGlobal, self.id as u8, 0));
            }
            let mut rem = st.remote.get(u).copied().unwrap_or(0);
            while let Some(l) = lowest(rem) {
                rem &= rem - 1;
                let via_se = self.remote_via_se() && st.barrier_kind != BarrierKind::AcrossPartial;
                if via_se {
                    out.send(
                        Dest::Se(u),
                        self.msg(addr, Opcode::BarrierDepartureOverflow, self.pack(u, l), 0),
                    );
                } else {
                    out.send(self.core(u, l), depart(l));
                }
            }
        }
        let overflow_info = st.overflow_info;
        let overflow_counts = std::mem::take(&mut st.overflow_counts);
        let prim = st.prim;
        *st = VarState {
            prim,
            overflow_info,
            overflow_counts,
            ..VarState::default()
        };
    }

    /// Barrier handling at an SE that is not the barrier's master.
    pub(super) fn barrier_local(
        &mut self,
        st: &mut VarState,
        from: Sender,
        m: Message,
        out: &mut HandlerOutput,
    ) -> Result<(), ProtocolError> {
        use Opcode::*;
        match (m.opcode, from) {
            (BarrierWaitLocalWithinUnit, Sender::Core(CoreId { local: c, .. })) => {
                self.barrier_check_total(st, &m)?;
                self.barrier_local_arrive(st, c, &m)?;
                if st.own.count_ones() as u64 == m.info {
                    self.barrier_local_depart(st, m.addr, out);
                }
                Ok(())
            }
            (BarrierWaitLocalAcrossUnits, Sender::Core(CoreId { local: c, .. })) => {
                self.barrier_check_total(st, &m)?;
                st.barrier_kind = BarrierKind::AcrossAll;
                self.barrier_local_arrive(st, c, &m)?;
                if st.own.count_ones() as usize == self.cfg.clients_per_unit {
                    st.requested = true;
                    let master = self.master_of(m.addr);
                    out.send(
                        Dest::Se(master),
                        self.msg(m.addr, BarrierWaitGlobal, self.id as u8, m.info),
                    );
                }
                Ok(())
            }
            (BarrierDepartGlobal, Sender::Se(_)) => {
                if !st.requested {
                    return Err(self.err(&m, "unsolicited barrier departure"));
                }
                self.barrier_local_depart(st, m.addr, out);
                Ok(())
            }
            _ => Err(self.err(&m, "unexpected barrier message at non-master SE")),
        }
    }

    fn barrier_local_arrive(&self, st: &mut VarState, c: usize, m: &Message) -> Result<(), ProtocolError> {
        if st.own & super::bit(c) != 0 || st.requested {
            return Err(self.err(m, format!("core {c} arrived twice at the same barrier episode")));
        }
        st.own |= super::bit(c);
        Ok(())
    }

    fn barrier_local_depart(&mut self, st: &mut VarState, addr: u64, out: &mut HandlerOutput) {
        let mut own = st.own;
        while let Some(c) = lowest(own) {
            own &= own - 1;
            out.send(
                self.core(self.unit, c),
                self.msg(addr, Opcode::BarrierDepartLocal, c as u8, 0),
            );
        }
        let prim = st.prim;
        *st = VarState {
            prim,
            ..VarState::default()
        };
    }
}
