"""One-call experiments: plant (and optional gateway) on loopback threads plus a controller."""
from __future__ import annotations

import threading

from ..plant import PlantConfig
from .controller import run_controller
from .gateway import Gateway
from .plant_server import PlantServer


def run_experiment(desc, plan, cycle=0.01, plant_cfg=None, gateway=None, seed=0,
                   simulated=True, log_path=None, host="127.0.0.1"):
    """Run a full loop and return the controller's :class:`LoopLog`.

    ``gateway`` is ``None`` for a direct connection or ``(base_ms, jitter_ms)``.
    """
    plant_cfg = plant_cfg or PlantConfig()
    server = PlantServer(desc, plant_cfg, f"{host}:0")
    errors = []

    def guarded(fn):
        def run():
            try:
                fn(accept_timeout=30)
            except Exception as exc:  # surfaced to the caller below
                errors.append(exc)
        return run

    threads = [threading.Thread(target=guarded(server.serve), name="plant", daemon=True)]
    target = server.endpoint
    if gateway is not None:
        base, jitter = gateway
        gw = Gateway(f"{host}:0", server.endpoint, base, jitter, seed, simulated)
        threads.append(threading.Thread(target=guarded(gw.serve), name="gateway", daemon=True))
        target = gw.endpoint
    for t in threads:
        t.start()
    try:
        looplog = run_controller(desc, plan, cycle, target, log_path, simulated)
    finally:
        for t in threads:
            t.join(timeout=30)
    if errors:
        raise errors[0]
    return looplog
