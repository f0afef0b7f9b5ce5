//! The interface a protocol state machine uses to act on the network.

use crate::engine::EventHandle;
use crate::packet::{DataPacket, DropReason, PacketKind};
use crate::time::SimTime;
use crate::world::NodeId;

/// Everything one node may do while handling an event. The simulator
/// implements this; unit tests use a recording mock.
pub trait NodeContext {
    type Msg;
    type Timer;

    fn me(&self) -> NodeId;
    fn now(&self) -> SimTime;

    /// Transmits to every node currently in range.
    fn broadcast(&mut self, msg: Self::Msg);
    /// Transmits after `delay`; the neighbor set is evaluated then.
    fn broadcast_after(&mut self, delay: SimTime, msg: Self::Msg);
    /// Returns false if `next` is out of range (nothing was transmitted).
    fn unicast(&mut self, next: NodeId, msg: Self::Msg) -> bool;

    /// Forwards a data packet one hop; hands it back on a link break.
    fn send_data(&mut self, next: NodeId, pkt: DataPacket) -> Result<(), DataPacket>;
    /// The packet reached its destination.
    fn deliver(&mut self, pkt: DataPacket);
    fn drop_data(&mut self, pkt: DataPacket, reason: DropReason);
    /// Records the loss of a control message at this node.
    fn drop_control(&mut self, kind: PacketKind);

    fn set_timer(&mut self, at: SimTime, timer: Self::Timer) -> EventHandle;
    fn cancel_timer(&mut self, handle: EventHandle) -> bool;
    /// Uniform draw in `[0, max)` from the run's seeded generator.
    fn random_delay(&mut self, max: SimTime) -> SimTime;
}
