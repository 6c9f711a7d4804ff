"""Networked control loop: frame protocol, plant server, delay gateway, controller."""
from .controller import run_controller
from .gateway import DelayLine, Gateway, delay_lines, run_gateway
from .looplog import LoopLog, read_log
from .plant_server import PlantServer, run_plant_server
from .protocol import (Frame, FrameError, MsgType, decode_frame, encode_frame)
from .session import run_experiment

__all__ = [
    "Frame", "FrameError", "MsgType", "encode_frame", "decode_frame",
    "PlantServer", "run_plant_server", "Gateway", "DelayLine", "delay_lines",
    "run_gateway", "run_controller", "LoopLog", "read_log", "run_experiment",
]
