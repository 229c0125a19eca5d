"""Command-line front end: ``ballistic-lab <command> [--config ...]``.

Exit codes: 0 success, 2 invalid input, 3 numerical tolerance failure.
Failures print one line ``error: category=<c> message=<m>`` on stderr.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .config import COMMANDS, ExperimentConfig, load_config
from .dynamics import (
    convergence_experiment,
    dyadic_times,
    make_plan,
    moment_series,
    position_growth,
    transport_exponents,
)
from .exceptions import BallisticLabError, ValidationError
from .floquet import (
    band_length_witness,
    band_structure,
    dos_constant_witness,
    dos_density,
    integrated_dos,
)
from .io import write_csv, write_json
from .lattice import LimitPeriodicFamily, WavePacket, as_periodic
from .spectral import (
    dirichlet_dos,
    dos_sup_distance,
    homogeneity_scan,
    lyapunov,
    lyapunov_vanishing_scan,
)
from .xy_chain import SpinChainSpec, commutator_norm, lr_velocity_lower_bound

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def _packet(spec, seed: int) -> WavePacket:
    if spec == "delta0":
        return WavePacket.delta(0)
    if isinstance(spec, dict) and "random" in spec:
        k = int(spec["random"])
        if k < 1:
            raise ValidationError("random packet needs at least one site")
        rng = np.random.default_rng(seed)
        amp = rng.normal(size=k) + 1j * rng.normal(size=k)
        return WavePacket(-(k // 2), amp / np.linalg.norm(amp))
    if isinstance(spec, dict) and "re" in spec:
        re = np.asarray(spec["re"], float)
        im = np.asarray(spec.get("im", np.zeros_like(re)), float)
        if re.shape != im.shape or re.size == 0:
            raise ValidationError("packet re/im must be nonempty and of equal length")
        return WavePacket(int(spec.get("offset", 0)), re + 1j * im)
    raise ValidationError(f"unrecognized packet specification {spec!r}")


def cmd_bands(cfg: ExperimentConfig, out: Path) -> None:
    P = as_periodic(cfg.operator)
    p = cfg.params
    bands = band_structure(P, int(p["sweep_M"]))
    write_csv(out / "bands.csv", ["alpha", "beta", "x"], bands.rows())
    lo, hi = bands.alpha[0], bands.beta[-1]
    pad = 0.05 * (hi - lo)
    E = np.linspace(lo - pad, hi + pad, int(p["dos_points"]))
    dens = dos_density(P, bands, E)
    ids = integrated_dos(P, bands, E)
    write_csv(out / "dos.csv", ["E", "density", "ids"], zip(E, dens, ids))
    write_json(
        out / "bands.json",
        {
            "config": cfg.echo(),
            "bands": bands.bands,
            "critical_points": bands.crit,
            "gap_open": bands.gap_open(),
            "measure": bands.measure,
            "dos_constant_witness": dos_constant_witness(bands),
        },
    )


def cmd_transport(cfg: ExperimentConfig, out: Path) -> None:
    p = cfg.params
    T = float(p["horizon"])
    if not T > 0 or not 0 < p["t_min"] < T:
        raise ValidationError("need 0 < t_min < horizon")
    plan = make_plan(cfg.operator, T, boundary_tol=cfg.tolerances["boundary_tol"])
    phi = _packet(p["packet"], cfg.seed)
    times = np.concatenate([[0.0], np.geomspace(float(p["t_min"]), T, int(p["n_times"]))])
    growth = position_growth(plan, phi, times)
    rows, reports = [], []
    for order in p["moments"]:
        s = moment_series(plan, phi, float(order), times)
        rep = transport_exponents(
            s,
            span_decades=p["span_decades"],
            window_decades=p["window_decades"],
            stride_decades=p["stride_decades"],
        )
        reports.append(rep.__dict__)
        rows += [
            (t, float(order), v, None if math.isnan(g) else g)
            for t, v, g in zip(times, s.values, growth)
        ]
    write_csv(out / "moments.csv", ["t", "p", "moment_p", "norm_X_t_over_t"], rows)
    write_json(out / "transport.json", {"config": cfg.echo(), "reports": reports})


def cmd_converge(cfg: ExperimentConfig, out: Path) -> None:
    P = as_periodic(cfg.operator)
    p = cfg.params
    rep = convergence_experiment(
        P, dyadic_times(int(p["k_max"])), int(p["M"]), cfg.tolerances["curve_floor"]
    )
    bound = rep.c_hat * rep.times**-0.2
    write_csv(
        out / "convergence.csv",
        ["t", "convergence_curve", "c_hat_bound"],
        zip(rep.times, rep.curve, bound),
    )
    bands = band_structure(P)
    write_json(
        out / "convergence.json",
        {
            "config": cfg.echo(),
            "exponent": rep.exponent,
            "c_hat": rep.c_hat,
            "gap_open": bands.gap_open(),
        },
    )


def cmd_spectral(cfg: ExperimentConfig, out: Path) -> None:
    op = cfg.operator
    P = as_periodic(op)
    p = cfg.params
    R = P.norm_bound
    z = np.linspace(-R - 1.0, R + 1.0, int(p["lyapunov_points"]))
    write_csv(out / "lyapunov.csv", ["z_real", "L"], zip(z, lyapunov(P, z)))

    bands = band_structure(P)
    n = int(p["dirichlet_n"])
    dd = dirichlet_dos(P, n)
    E = np.linspace(bands.alpha[0], bands.beta[-1], int(p["dos_points"]))
    write_csv(
        out / "dirichlet_dos.csv",
        ["E", "cdf_n", "cdf_floquet"],
        zip(E, dd.cdf(E), integrated_dos(P, bands, E)),
    )

    stages = list(op.stages) if isinstance(op, LimitPeriodicFamily) else [P]
    C = band_length_witness(stages)
    delta0 = C ** -stages[0].q
    dmin = float(p["delta_min"])
    if not 0 < dmin <= delta0:
        raise ValidationError(f"delta_min must lie in (0, delta0={delta0!r}]")
    deltas = np.geomspace(dmin, delta0, int(p["homogeneity_points"]))
    rows, minima = [], []
    for k, st in enumerate(stages):
        r = homogeneity_scan(band_structure(st), deltas)
        minima.append(float(r.min()))
        rows += [(k, st.q, d, v) for d, v in zip(deltas, r)]
    write_csv(out / "homogeneity.csv", ["stage", "q", "delta", "min_ratio"], rows)
    write_json(
        out / "spectral.json",
        {
            "config": cfg.echo(),
            "dirichlet_sup_distance": dos_sup_distance(P, n, bands),
            "lyapunov_vanishing_fraction": lyapunov_vanishing_scan(
                P, tol=cfg.tolerances["lyapunov_tol"]
            ),
            "band_length_witness": C,
            "delta0": delta0,
            "stage_min_ratio": minima,
        },
    )


def cmd_xy(cfg: ExperimentConfig, out: Path) -> None:
    P = as_periodic(cfg.operator)
    p = cfg.params
    T = float(p["horizon"])
    times = np.linspace(T / p["n_times"], T, int(p["n_times"]))
    rep = lr_velocity_lower_bound(P, float(p["epsilon"]), times, int(p["ceiling_M"]))
    L = int(p["many_body_length"])
    if L:
        sites = np.arange(1, L + 1)
        spec = SpinChainSpec(P.a_at(sites[:-1]), P.b_at(sites))
        samples = [commutator_norm(spec, (1, "z"), (L, "z"), t) for t in times]
    else:
        samples = [None] * times.size
    write_csv(
        out / "light_cone.csv",
        ["t", "d_epsilon", "commutator_norm_samples"],
        zip(times, rep.cone.distances, samples),
    )
    write_json(out / "velocity.json", {"config": cfg.echo(), **rep.to_dict()})


HANDLERS = {
    "bands": cmd_bands,
    "transport": cmd_transport,
    "converge": cmd_converge,
    "spectral": cmd_spectral,
    "xy": cmd_xy,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ballistic-lab",
        description="Spectral and transport experiments for periodic and limit-periodic Jacobi matrices.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "bands": "band edges, gap critical points and density of states",
        "transport": "position moments and transport exponents",
        "converge": "time-averaged velocity convergence curve",
        "spectral": "Lyapunov exponent, Dirichlet DOS and homogeneity scans",
        "xy": "XY-chain light cone and velocity estimate",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--out", default=".", help="output directory (default: .)")
        sp.add_argument("--seed", type=int, help="seed for randomized inputs")
        sp.add_argument("--threads", type=int, help="BLAS thread cap (env BALLISTIC_LAB_THREADS)")
        sp.add_argument(
            "--tolerance",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a tolerance; repeatable",
        )
    return parser


def _fail(category: str, message: str, code: int) -> int:
    msg = " ".join(str(message).split())
    print(f"error: category={category} message={msg}", file=sys.stderr)
    return code


def _threads(arg) -> int | None:
    if arg is not None:
        n = arg
    else:
        env = os.environ.get("BALLISTIC_LAB_THREADS")
        if not env:
            return None
        try:
            n = int(env)
        except ValueError:
            raise ValidationError(f"BALLISTIC_LAB_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise ValidationError("thread count must be positive")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config, args.seed, args.tolerance)
        n = _threads(args.threads)
        out = Path(args.out)
        if n is None:
            HANDLERS[args.command](cfg, out)
        else:
            with threadpool_limits(limits=n):
                HANDLERS[args.command](cfg, out)
    except BallisticLabError as exc:
        code = EXIT_VALIDATION if exc.category == "validation" else EXIT_NUMERICAL
        return _fail(exc.category, exc, code)
    except (ValueError, TypeError, KeyError) as exc:
        return _fail("validation", exc, EXIT_VALIDATION)
    except ArithmeticError as exc:
        return _fail("numerical", exc, EXIT_NUMERICAL)
    except OSError as exc:
        return _fail("validation", exc, EXIT_VALIDATION)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
