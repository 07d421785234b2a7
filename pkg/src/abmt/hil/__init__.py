"""Hardware-in-the-loop bridge: virtual robots mimicking a running simulation."""
from .bridge import BridgeConfig, BridgeMetrics, BridgeTrace, run_bridge, write_bridge_csv
from .channel import CENTRAL, GOSSIP, ChannelModel, ChannelState, comm_tick
from .frames import BridgeFrame, FrameError, SeqFilter
from .graycode import GrayCodeSchedule, LocalizerState, gray_decode, gray_encode, localize_tick
from .robot import RobotParams, RobotState, drive_tick
from .transport import LoopbackTransport, UdpTransport

__all__ = [
    "BridgeConfig",
    "BridgeFrame",
    "BridgeMetrics",
    "BridgeTrace",
    "CENTRAL",
    "ChannelModel",
    "ChannelState",
    "FrameError",
    "GOSSIP",
    "GrayCodeSchedule",
    "LocalizerState",
    "LoopbackTransport",
    "RobotParams",
    "RobotState",
    "SeqFilter",
    "UdpTransport",
    "comm_tick",
    "drive_tick",
    "gray_decode",
    "gray_encode",
    "localize_tick",
    "run_bridge",
    "write_bridge_csv",
]
