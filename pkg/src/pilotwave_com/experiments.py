"""Scripted experiments behind the CLI: each runner executes one named
setup, writes CSV/SVG artifacts, and evaluates its check gates."""

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .artifacts import emit_csv, emit_svg, ensure_dir
from .bohm import (CatStateSpec, ProductStateSpec, integrate_trajectories,
                   ks_statistic, marginal_cdf_at,
                   sequential_conditional_sample, velocity_field)
from .classical import ClassicalPropagator, classical_trajectories
from .com_analysis import (newton_reference, required_error,
                           required_particles, worked_example)
from .config import dump_config
from .coords import (_condition_residuals, build_coord_change,
                     cancellation_factors, laplacian_identity_residual,
                     v_cm_reduction)
from .errors import ConfigError
from .grid import (GaussianPacketSpec, Grid1D, PotentialSpec, make_gaussian,
                   quantile_positions, sample_positions)
from .manybody import ComConvergenceConfig, run_com_convergence
from .tdse import PropagatorCN, stationary_state


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.detail}"


@dataclass
class RunResult:
    experiment: str
    checks: list
    artifacts: list
    elapsed: float

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _grid_from(cfg) -> Grid1D:
    g = cfg["numerics"]["grid"]
    return Grid1D(g["x_min"], g["x_max"], g["n_points"])


def _potential_from(cfg) -> PotentialSpec:
    p = dict(cfg["physics"]["potential"])
    return PotentialSpec(**p)


def _packet_from(cfg) -> GaussianPacketSpec:
    p = cfg["physics"]["packet"]
    return GaussianPacketSpec(sigma=p["sigma"], x0=p["x0"], k0=p["k0"])


def _initial_positions(wf, cfg, rng):
    n = cfg["numerics"]["n_trajectories"]
    if cfg["numerics"]["sampling"] == "stratified":
        return quantile_positions(wf, n)
    return sample_positions(wf, n, rng)


def _emit_trajectories(path, ensemble, n_plot):
    n = min(n_plot, ensemble.n_experiments)
    cols = [ensemble.times] + [ensemble.positions[j, 0] for j in range(n)]
    header = ["t"] + [f"x{j}" for j in range(n)]
    return emit_csv(path, header, cols)


def run_fig1(cfg, out_dir, svg=True):
    """Linear-potential packet: trajectory ensemble vs the Newton parabola."""
    num = cfg["numerics"]
    phys = cfg["physics"]
    grid = _grid_from(cfg)
    pot = _potential_from(cfg)
    packet = _packet_from(cfg)
    wf = make_gaussian(packet, grid, phys["mass"], phys["hbar"])
    prop = PropagatorCN(grid, num["dt"], pot, phys["mass"], phys["hbar"])
    n_steps = int(round(num["t_max"] / num["dt"]))
    rng = np.random.default_rng(cfg["seed"])
    pos0 = _initial_positions(wf, cfg, rng)
    ens = integrate_trajectories(prop, wf, pos0, n_steps,
                                 record_stride=num["record_stride"])
    mean = ens.positions[:, 0, :].mean(axis=0)
    v0 = phys["hbar"] * packet.k0 / phys["mass"]
    ref = newton_reference(pot, phys["mass"], packet.x0, v0,
                           float(ens.times[1] - ens.times[0]),
                           len(ens.times) - 1)
    dev = float(np.max(np.abs(mean - ref.x_cm)))
    arts = [
        _emit_trajectories(os.path.join(out_dir, "trajectories.csv"), ens,
                           num["n_plot_trajectories"]),
        emit_csv(os.path.join(out_dir, "ensemble_mean.csv"),
                 ["t", "mean_x", "newton_x"], [ens.times, mean, ref.x_cm]),
    ]
    if svg:
        n = min(num["n_plot_trajectories"], ens.n_experiments)
        arts.append(emit_svg(
            os.path.join(out_dir, "trajectories.svg"), ens.times,
            [ens.positions[j, 0] for j in range(n)] + [mean],
            labels=[""] * n + ["mean"], title="linear potential trajectories"))
    checks = [Check("ensemble mean tracks the parabola",
                    dev < 3e-2, f"max deviation {dev:.3e} (bound 3e-2)")]
    return checks, arts


def run_fig2(cfg, out_dir, svg=True):
    """Harmonic ground state: velocities and trajectories stay put."""
    num = cfg["numerics"]
    phys = cfg["physics"]
    grid = _grid_from(cfg)
    pot = _potential_from(cfg)
    wf = stationary_state(grid, pot, 0, phys["mass"], phys["hbar"])
    prop = PropagatorCN(grid, num["dt"], pot, phys["mass"], phys["hbar"])
    n_steps = int(round(num["t_max"] / num["dt"]))
    stride = num["record_stride"]

    interior = wf.density >= 1e-8 * wf.density.max()
    xs_interior = grid.x[interior]
    psi = wf.amplitudes.copy()
    max_v = 0.0
    vseries = [0.0]
    times = [0.0]
    for s in range(1, n_steps + 1):
        psi = prop._apply(psi)
        if s % stride == 0 or s == n_steps:
            w = wf.with_amplitudes(psi)
            v = float(np.max(np.abs(velocity_field(w, xs_interior))))
            max_v = max(max_v, v)
            vseries.append(v)
            times.append(s * prop.dt)

    rng = np.random.default_rng(cfg["seed"])
    pos0 = _initial_positions(wf, cfg, rng)
    ens = integrate_trajectories(prop, wf, pos0, n_steps, record_stride=stride)
    disp = float(np.max(np.abs(ens.positions - ens.positions[..., :1])))
    arts = [
        emit_csv(os.path.join(out_dir, "interior_speed.csv"),
                 ["t", "max_speed"], [times, vseries]),
        _emit_trajectories(os.path.join(out_dir, "trajectories.csv"), ens,
                           num["n_plot_trajectories"]),
    ]
    if svg:
        n = min(num["n_plot_trajectories"], ens.n_experiments)
        arts.append(emit_svg(
            os.path.join(out_dir, "trajectories.svg"), ens.times,
            [ens.positions[j, 0] for j in range(n)],
            labels=[""] * n, title="harmonic ground state trajectories"))
    checks = [
        Check("interior velocities vanish", max_v < 1e-8,
              f"max |v| {max_v:.3e} (bound 1e-8)"),
        Check("trajectories static", disp < 1e-6,
              f"max displacement {disp:.3e} (bound 1e-6)"),
    ]
    return checks, arts


def _spearman(xs, ys):
    """Spearman rank correlation (small n, no ties expected)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    rx = np.argsort(np.argsort(xs))
    ry = np.argsort(np.argsort(ys))
    n = len(xs)
    return float(1.0 - 6.0 * np.sum((rx - ry) ** 2) / (n * (n * n - 1)))


def run_fig3(cfg, out_dir, svg=True, threads=1):
    """Center-of-mass convergence: error vs N, exchange vs no exchange."""
    c = cfg["com_convergence"]
    conv = ComConvergenceConfig(
        n_values=tuple(c["n_values"]),
        seeds=tuple(range(c["n_seeds"])),
        mode=c["mode"],
        sigma=c["sigma"],
        x_left_range=tuple(c["x_left_range"]),
        x_right_range=tuple(c["x_right_range"]),
        k_left_range=tuple(c["k_left_range"]),
        k_right_range=tuple(c["k_right_range"]),
        field_strength=c["field_strength"],
        charge=c["charge"],
        mass=c["mass"],
        hbar=c["hbar"],
        t_max=c["t_max_natural"] * c["mass"] * c["sigma"] ** 2 / c["hbar"],
        n_record=c["n_record"],
        points_per_sigma=c["points_per_sigma"],
    )
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            result = run_com_convergence(conv, pool_map=pool.map)
    else:
        result = run_com_convergence(conv)

    arts = []
    modes = list(result.errors)
    for n in conv.n_values:
        header = ["t"]
        cols = [result.times]
        for m in modes:
            header.append(f"err_{m}")
            cols.append(result.errors[m][n].mean(axis=0))
        arts.append(emit_csv(os.path.join(out_dir, f"com_error_N{n}.csv"),
                             header, cols))
    checks = []
    if "exchange" in modes:
        mean_finals = result.mean_final_errors("exchange")
        rho = _spearman(list(mean_finals), [mean_finals[n] for n in mean_finals])
        checks.append(Check(
            "error decreases with N (exchange)", rho < -0.8,
            f"spearman {rho:+.3f} finals "
            + " ".join(f"N{n}={v:.3g}" for n, v in mean_finals.items())))
        if svg:
            n_big = max(conv.n_values)
            arts.append(emit_svg(
                os.path.join(out_dir, "com_error.svg"), result.times,
                [result.errors["exchange"][n].mean(axis=0) for n in conv.n_values],
                labels=[f"N={n}" for n in conv.n_values],
                title="relative CoM error (exchange)"))
            arts.append(emit_svg(
                os.path.join(out_dir, "com_paths.svg"), result.times,
                [result.com_quantum["exchange"][n_big][0],
                 result.com_newton["exchange"][n_big][0]],
                labels=["quantum", "newton"],
                title=f"center of mass, N={n_big}, seed 0"))
    if "distinguishable" in modes:
        mean_finals = result.mean_final_errors("distinguishable")
        rho = _spearman(list(mean_finals), [mean_finals[n] for n in mean_finals])
        checks.append(Check(
            "error decreases with N (no exchange)", rho < -0.8,
            f"spearman {rho:+.3f}"))
    if len(modes) == 2:
        n_big = max(conv.n_values)
        ex = result.errors["exchange"][n_big][:, -1]
        di = result.errors["distinguishable"][n_big][:, -1]
        wins = float(np.mean(ex <= di))
        checks.append(Check(
            "exchange at least as classical as no-exchange",
            wins >= 0.7, f"exchange wins {wins:.0%} of seeds at N={n_big}"))
    return checks, arts


def run_fig4(cfg, out_dir, svg=True):
    """Dispersionless transport in a linear potential."""
    return _classical_run(cfg, out_dir, svg, harmonic=False)


def run_fig5(cfg, out_dir, svg=True):
    """Narrow packet in a harmonic well over one period."""
    return _classical_run(cfg, out_dir, svg, harmonic=True)


def _classical_run(cfg, out_dir, svg, harmonic):
    num = cfg["numerics"]
    phys = cfg["physics"]
    grid = _grid_from(cfg)
    pot = _potential_from(cfg)
    packet = _packet_from(cfg)
    wf = make_gaussian(packet, grid, phys["mass"], phys["hbar"])
    cutoff = num["filter_cutoff"] if num["filter_cutoff"] > 0 else None
    prop = ClassicalPropagator(grid, num["dt"], pot, phys["mass"],
                               phys["hbar"], filter_cutoff=cutoff)
    n_steps = int(round(num["t_max"] / num["dt"]))
    stride = num["trajectory_stride"]
    n_steps -= n_steps % stride
    rng = np.random.default_rng(cfg["seed"])
    pos0 = _initial_positions(wf, cfg, rng)
    ens, rec = classical_trajectories(
        prop, wf, pos0, n_steps, stride=stride,
        record_stride=max(1, num["record_stride"] // stride),
        strict=False, return_record=True)
    arts = [
        emit_csv(os.path.join(out_dir, "packet.csv"),
                 ["t", "mean_x", "width", "norm"],
                 [rec.times, rec.mean_x, rec.width, rec.norm]),
        _emit_trajectories(os.path.join(out_dir, "trajectories.csv"), ens,
                           num["n_plot_trajectories"]),
    ]
    if svg:
        n = min(num["n_plot_trajectories"], ens.n_experiments)
        arts.append(emit_svg(
            os.path.join(out_dir, "trajectories.svg"), ens.times,
            [ens.positions[j, 0] for j in range(n)], labels=[""] * n,
            title="classical-equation trajectories"))
    width_drift = float(np.max(np.abs(rec.width - rec.width[0])) / rec.width[0])
    if harmonic:
        omega = np.sqrt(pot.k / phys["mass"])
        target = packet.x0 * np.cos(omega * rec.times)
        center_err = float(np.max(np.abs(rec.mean_x - target)))
        end_drift = abs(rec.width[-1] - rec.width[0]) / rec.width[0]
        checks = [
            Check("packet center follows the classical oscillation",
                  center_err < 1e-2, f"max center error {center_err:.3e} (bound 1e-2)"),
            Check("width recovered after one period", end_drift < 2e-2,
                  f"width drift {end_drift:.3%} (bound 2%)"),
        ]
    else:
        v0 = phys["hbar"] * packet.k0 / phys["mass"]
        ref = newton_reference(pot, phys["mass"], packet.x0, v0,
                               float(rec.times[1] - rec.times[0]),
                               len(rec.times) - 1)
        center_err = float(np.max(np.abs(rec.mean_x - ref.x_cm)))
        sep0 = ens.positions[:, 0, 0][:, None] - ens.positions[:, 0, 0][None, :]
        sep_t = ens.positions[:, 0, :][:, None, :] - ens.positions[:, 0, :][None, :, :]
        rigid = float(np.max(np.abs(sep_t - sep0[..., None])))
        checks = [
            Check("width constant", width_drift < 1e-2,
                  f"max width drift {width_drift:.3%} (bound 1%)"),
            Check("packet center follows the parabola", center_err < 1e-3,
                  f"max center error {center_err:.3e} (bound 1e-3)"),
            Check("trajectories congruent", rigid < 1e-3,
                  f"max pairwise separation drift {rigid:.3e} (bound 1e-3)"),
        ]
    return checks, arts


def run_appendix_a(cfg, out_dir, svg=True):
    """Error-budget numbers: particle counts, tail ratios, worked example."""
    n_f = required_particles(0.005, 0.98)
    ratio = required_error(6e23, 2e12)
    budget = worked_example()
    print(f"required particles (err=0.005 sigma, P=0.98): {n_f:.4g}")
    print(f"required err/sigma (N=6e23, M=2e12):          {ratio:.4g}")
    print(f"worked example absolute error:                {budget.err * 1e6:.3g} um")
    arts = [emit_csv(os.path.join(out_dir, "budget.csv"),
                     ["required_particles", "required_err_ratio",
                      "worked_sigma_m", "worked_err_m"],
                     [[n_f], [ratio], [budget.sigma], [budget.err]])]
    checks = [
        Check("particle count near 2e5", 1.9e5 <= n_f <= 2.4e5,
              f"{n_f:.5g} in [1.9e5, 2.4e5]"),
        Check("error ratio near 9e-12", abs(ratio - 9e-12) <= 0.05 * 9e-12,
              f"{ratio:.4g} within 5% of 9e-12"),
        Check("worked example near 8 um", abs(budget.err - 8e-6) <= 0.1 * 8e-6,
              f"{budget.err * 1e6:.3g} um within 10% of 8 um"),
    ]
    return checks, arts


def run_appendix_b(cfg, out_dir, svg=True):
    """Coordinate-change identities at machine precision."""
    rows = []
    worst_cond = 0.0
    for n in (2, 3, 17, 256, 1024):
        ch = build_coord_change(n)
        res = max(abs(v) for v in _condition_residuals(n, ch.a, ch.b, ch.c))
        rows.append((f"conditions N={n}", res))
        worst_cond = max(worst_cond, res)
    worst_cancel = 0.0
    for n in (1, 100, 6_000_000):
        beta, gamma = cancellation_factors(n)
        rows.append((f"cancellation N={n}", max(abs(beta), abs(gamma))))
        worst_cancel = max(worst_cancel, abs(beta), abs(gamma))
    lap2 = laplacian_identity_residual(2, n_points=100, rng=1)
    lap4 = laplacian_identity_residual(4, n_points=100, rng=2, anisotropic=True)
    rows += [("laplacian N=2", lap2), ("laplacian N=4 anisotropic", lap4)]
    red_lin = v_cm_reduction(PotentialSpec(kind="linear", slope=2.0), 10, rng=3)
    red_quad = v_cm_reduction(PotentialSpec(kind="harmonic", k=2.0), 20, rng=4)
    rows += [("reduction linear N=10", red_lin.max_residual),
             ("reduction quadratic N=20", red_quad.max_residual)]
    for name, value in rows:
        print(f"{name}: {value:.3e}")
    arts = [emit_csv(os.path.join(out_dir, "identities.csv"),
                     ["residual"], [[v for _, v in rows]])]
    checks = [
        Check("coefficient conditions", worst_cond < 1e-12,
              f"worst residual {worst_cond:.2e} (bound 1e-12)"),
        Check("cancellation factors", worst_cancel < 1e-10,
              f"worst factor {worst_cancel:.2e}"),
        Check("laplacian identity", lap2 < 1e-6 and lap4 < 1e-5,
              f"N=2 {lap2:.2e}, N=4 {lap4:.2e}"),
        Check("potential reduction", red_lin.max_residual < 1e-10
              and red_quad.max_residual < 1e-9,
              f"linear {red_lin.max_residual:.2e}, quadratic {red_quad.max_residual:.2e}"),
    ]
    return checks, arts


def run_cat_state(cfg, out_dir, svg=True):
    """One-sided experiments of the two-packet superposition."""
    c = cfg["cat"]
    rng = np.random.default_rng(cfg["seed"])
    state = CatStateSpec(GaussianPacketSpec(sigma=c["sigma"]),
                         x_left=c["x_left"], x_right=c["x_right"],
                         n_particles=c["n_particles"])
    midpoint = 0.5 * (c["x_left"] + c["x_right"])
    n_exp = c["n_experiments"]
    one_sided = 0
    lefts = 0
    ks_vals = np.empty(n_exp)
    for j in range(n_exp):
        pos = sequential_conditional_sample(state, rng)
        left = pos < midpoint
        if left.all() or (~left).all():
            one_sided += 1
        if left.all():
            lefts += 1
        ks_vals[j] = ks_statistic(pos, marginal_cdf_at(state, pos))
    frac_one_sided = one_sided / n_exp
    left_fraction = lefts / n_exp

    # contrast: a single product-state experiment fills the marginal
    span = 8.0 * c["sigma"]
    grid = Grid1D(-span, span, 4096)
    psi = make_gaussian(GaussianPacketSpec(sigma=c["sigma"]), grid)
    product = ProductStateSpec(psi, c["product_n"])
    prod_pos = sequential_conditional_sample(product, rng)
    prod_ks = ks_statistic(prod_pos, marginal_cdf_at(product, prod_pos))

    arts = [emit_csv(os.path.join(out_dir, "cat_summary.csv"),
                     ["one_sided_fraction", "left_fraction", "min_ks",
                      "product_ks"],
                     [[frac_one_sided], [left_fraction],
                      [float(ks_vals.min())], [prod_ks]])]
    checks = [
        Check("every experiment one-sided", frac_one_sided == 1.0,
              f"{frac_one_sided:.3f} of {n_exp} experiments"),
        Check("left fraction balanced", abs(left_fraction - 0.5) <= 0.05,
              f"left fraction {left_fraction:.3f} (0.5 +- 0.05)"),
        Check("cat experiments miss the marginal", float(ks_vals.min()) >= 0.45,
              f"min KS {ks_vals.min():.3f} (bound 0.45)"),
        Check("product experiment fills the marginal", prod_ks < 0.05,
              f"KS {prod_ks:.4f} (bound 0.05)"),
    ]
    return checks, arts


def run_custom(cfg, out_dir, svg=True):
    """Generic single-packet run with the configured engine and potential."""
    if cfg["physics"]["engine"] == "classical":
        return _classical_run(cfg, out_dir, svg, harmonic=False)
    return run_fig1(cfg, out_dir, svg)


_RUNNERS = {
    "fig1": run_fig1,
    "fig2": run_fig2,
    "fig4": run_fig4,
    "fig5": run_fig5,
    "appendix-a": run_appendix_a,
    "appendix-b": run_appendix_b,
    "cat-state": run_cat_state,
    "custom": run_custom,
}


def run(config: dict, out_dir: str | None = None, threads: int = 1) -> RunResult:
    """Execute the configured experiment and write its artifacts."""
    name = config["experiment"]
    out = out_dir or config["output"]["directory"] or os.path.join("runs", name)
    ensure_dir(out)
    svg = config["output"]["svg"]
    started = time.perf_counter()
    if name == "fig3":
        checks, arts = run_fig3(config, out, svg, threads=threads)
    else:
        runner = _RUNNERS.get(name)
        if runner is None:
            raise ConfigError(f"no runner for experiment {name!r}")
        checks, arts = runner(config, out, svg)
    elapsed = time.perf_counter() - started
    meta = {
        "experiment": name,
        "resolved_config": yamlable(config),
        "version": __version__,
        "wall_time_s": elapsed,
    }
    meta_path = os.path.join(out, "run_metadata.json")
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    arts.append(meta_path)
    cfg_path = os.path.join(out, "resolved_config.yaml")
    with open(cfg_path, "w") as fh:
        fh.write(dump_config(yamlable(config)))
    arts.append(cfg_path)
    return RunResult(experiment=name, checks=checks, artifacts=arts,
                     elapsed=elapsed)


def yamlable(obj):
    if isinstance(obj, dict):
        return {k: yamlable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [yamlable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj
