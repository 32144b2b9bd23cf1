"""
Thermal-limit calibration for a grid description.

Runs the reference topology over every row of a set of chronics and sets each
line's limit so that its peak loading equals ``margin``. With calm chronics
and a margin below 1 the do-nothing policy never overloads; stressed
chronics push demand above the calibrated envelope.

Usage:
    python -m src.grid.calibration --out grid.json --seed 0 --margin 0.9
"""
import argparse
import sys
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

from src.exceptions import GridSpecError
from src.grid.model import BUNDLED_CASE5, GridSpec, dump_grid, load_grid
from src.grid.power_flow import solve_dc_power_flow
from src.grid.topology import Injections, Topology, build_electrical_graph
from src.monitoring.logger import get_logger, setup_logging

logger = get_logger(__name__)


def peak_line_flows(spec: GridSpec, chronics: Iterable) -> np.ndarray:
    """Largest |flow| per line under the reference topology."""
    topo = Topology.reference(spec)
    peak = np.zeros(spec.n_lines)
    for chronic in chronics:
        for t in range(chronic.load_mw.shape[0]):
            graph = build_electrical_graph(spec, topo, Injections(chronic.gen_mw[t], chronic.load_mw[t]))
            result = solve_dc_power_flow(graph)
            if not result.feasible:
                raise GridSpecError(f"reference topology infeasible on chronic {chronic.id} at step {t}")
            np.maximum(peak, np.abs(result.flow_mw), out=peak)
    return peak


def calibrate_line_limits(spec: GridSpec, chronics: Iterable, margin: float = 0.9) -> GridSpec:
    """Return a copy of ``spec`` whose limits put peak reference loading at ``margin``."""
    if not 0 < margin:
        raise ValueError(f"margin must be positive, got {margin}")
    peak = peak_line_flows(spec, chronics)
    limits = spec.line_limits.copy()
    carrying = peak > 1e-9
    limits[carrying] = peak[carrying] / margin
    logger.info(
        "line_limits_calibrated",
        grid=spec.name,
        margin=margin,
        limits=[round(float(x), 3) for x in limits],
    )
    return spec.with_line_limits(limits)


def main(argv: Optional[List[str]] = None) -> int:
    from src.env.chronics import ChronicProfile, generate_chronics

    parser = argparse.ArgumentParser(prog="python -m src.grid.calibration", description=__doc__.split("\n\n")[0])
    parser.add_argument("--grid", type=Path, default=BUNDLED_CASE5, help="grid description to calibrate")
    parser.add_argument("--out", type=Path, required=True, help="where to write the calibrated grid")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--count", type=int, default=20)
    parser.add_argument("--margin", type=float, default=0.9)
    args = parser.parse_args(argv)

    setup_logging()
    spec = load_grid(args.grid)
    episode_set = generate_chronics(spec, args.seed, count=args.count, profile=ChronicProfile.calm())
    calibrated = calibrate_line_limits(spec, episode_set.chronics.values(), margin=args.margin)
    dump_grid(calibrated, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
