"""Command-line interface: ``svarmsh <verb> [options]``.

Verbs: ``simulate``, ``estimate``, ``sddr``, ``mdd``, ``identify``, ``compare``.
Every numerical output is produced by the same library call a script would
make; the commands only read inputs and write files.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import reports
from .config import (
    RunConfig,
    csv_text,
    data_to_csv_text,
    default_truth,
    load_config,
    load_matrix_csv,
    load_truth,
    parse_csv_text,
    parse_rows,
)
from .errors import DataFormatError
from .gibbs import DrawStore, run_sampler
from .identification import check_identification
from .inference import (
    Hypothesis,
    MddResult,
    SddrResult,
    estimate_mdd,
    posterior_lambdas_mean,
    psrf,
    sddr_joint_homoskedasticity,
    sddr_joint_identification,
    sddr_homoskedasticity,
    sddr_pair_identification,
)
from .model import ModelParameters, TimeSeriesData, build_design, simulate_data
from .store import dump_json, exclusive_dir, load_store, save_store

DEFAULT_HYPOTHESES = ("identification:all-pairs", "homoskedasticity:each", "homoskedasticity:joint:all")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_table(out: Path, stem: str, table) -> str:
    header, rows = table
    _write(out / f"{stem}.csv", csv_text(header, rows))
    return reports.render_text(header, rows)


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(params: ModelParameters, periods: int, seed: int, out: Path, names=()) -> tuple[TimeSeriesData, dict]:
    """Simulate a dataset; writes ``data.csv`` and ``truth.json`` into ``out``."""
    names = tuple(names) or tuple(f"y{n + 1}" for n in range(params.N))
    data, states = simulate_data(params, periods, seed=seed, names=names)
    truth = {
        "params": params.to_dict(),
        "periods": periods,
        "lags": params.p,
        "seed": seed,
        "states": (states.s + 1).tolist(),
        "variables": list(names),
    }
    out.mkdir(parents=True, exist_ok=True)
    with exclusive_dir(out):
        _write(out / "data.csv", data_to_csv_text(data))
        dump_json(truth, out / "truth.json")
    return data, truth


# --------------------------------------------------------------------------
# estimate


def cmd_estimate(cfg: RunConfig) -> tuple[DrawStore, dict]:
    """Run the sampler and write the draw store plus report tables into ``cfg.out_dir``."""
    text = Path(cfg.data_path).read_text(encoding="utf-8")
    data = parse_csv_text(text, str(cfg.data_path), cfg.p)
    design = build_design(data, cfg.p)
    scheme = cfg.scheme(data.N)
    sampler = cfg.sampler_config()
    meta = {"data_digest": data.digest(), "variables": list(data.names), "seed": cfg.seed}
    store = run_sampler(design, cfg.M, scheme, cfg.prior, sampler, metadata=meta)
    out = Path(cfg.out_dir)
    save_store(store, out, data_csv=data_to_csv_text(data))
    bundle = write_estimate_reports(store, out)
    return store, bundle


def write_estimate_reports(store: DrawStore, out: Path) -> dict:
    rep = out / "reports"
    text = ["posterior summary", _write_table(rep, "summary", reports.posterior_summary(store))]
    text += ["posterior mean of A0", _write_table(rep, "a0", reports.a0_table(store))]
    rv = reports.relative_variance_table(store)
    if rv is None:
        text.append("relative variances: none (single volatility state; identification through heteroskedasticity unavailable)\n")
    else:
        text += ["relative variances", _write_table(rep, "relative_variances", rv)]
    header, rows = reports.state_probability_table(store)
    _write(rep / "state_probs.csv", csv_text(header, rows))
    ll = np.array([c.loglik_marginal for c in store.chains])
    diag = {
        "acceptance_alpha": [float(c.accept_alpha.mean()) for c in store.chains],
        "acceptance_P": [float(c.accept_P.mean()) for c in store.chains],
        "psrf_loglik": psrf(ll) if ll.shape[0] > 1 and ll.shape[1] > 1 else None,
        "n_draws": store.n_draws,
    }
    dump_json(diag, rep / "diagnostics.json")
    text.append(f"diagnostics: {json.dumps(diag, sort_keys=True)}\n")
    summary = "\n".join(text)
    _write(rep / "summary.txt", summary)
    return {"text": summary, "diagnostics": diag}


# --------------------------------------------------------------------------
# sddr


def parse_hypotheses(texts, N: int, M: int) -> list[Hypothesis]:
    """Expand hypothesis strings.

    * ``identification:all-pairs`` or ``identification:i,j``
    * ``pair:m:i,j`` (single state ``m``)
    * ``homoskedasticity:each`` or ``homoskedasticity:i``
    * ``homoskedasticity:joint:all`` or ``homoskedasticity:joint:i,j,...``
    """
    out: list[Hypothesis] = []
    every = list(range(1, N + 1))
    ints = lambda s: tuple(int(t) for t in s.split(",") if t.strip())  # noqa: E731
    for text in texts:
        parts = text.strip().lower().split(":")
        try:
            if parts[0] == "identification" and parts[1:] == ["all-pairs"]:
                out += [Hypothesis("identification", (i, j)) for i in every for j in every if i < j]
            elif parts[0] == "identification" and len(parts) == 2:
                out.append(Hypothesis("identification", ints(parts[1])))
            elif parts[0] == "pair" and len(parts) == 3:
                out.append(Hypothesis("pair", ints(parts[2]), int(parts[1])))
            elif parts[0] == "homoskedasticity" and parts[1:] == ["each"]:
                out += [Hypothesis("homoskedasticity", (i,)) for i in every]
            elif parts[0] == "homoskedasticity" and len(parts) == 3 and parts[1] == "joint":
                eqs = tuple(every) if parts[2] == "all" else ints(parts[2])
                out.append(Hypothesis("joint_homoskedasticity", eqs))
            elif parts[0] == "homoskedasticity" and len(parts) == 2:
                out.append(Hypothesis("homoskedasticity", ints(parts[1])))
            else:
                raise ValueError
            h = out[-1]
            if not h.equations or any(not 1 <= i <= N for i in h.equations):
                raise ValueError
            if h.kind in ("pair", "identification") and (len(h.equations) != 2 or h.equations[0] == h.equations[1]):
                raise ValueError
            if h.kind == "homoskedasticity" and len(h.equations) != 1:
                raise ValueError
            if h.kind == "pair" and not 2 <= h.state <= M:
                raise ValueError
        except (ValueError, IndexError):
            raise ValueError(
                f"unknown hypothesis {text!r}; use identification:all-pairs, identification:i,j, pair:m:i,j, "
                "homoskedasticity:each, homoskedasticity:i or homoskedasticity:joint:all|i,j,..."
            ) from None
    if M < 2 and out:
        raise ValueError("density-ratio tests need at least two volatility states")
    return out


def evaluate_hypothesis(store: DrawStore, h: Hypothesis) -> SddrResult:
    if h.kind == "pair":
        return sddr_pair_identification(store, h.state, *h.equations)
    if h.kind == "identification":
        return sddr_joint_identification(store, *h.equations)
    if h.kind == "homoskedasticity":
        return sddr_homoskedasticity(store, h.equations[0])
    return sddr_joint_homoskedasticity(store, h.equations)


def cmd_sddr(store: DrawStore, texts, out: Path) -> list[SddrResult]:
    hyps = parse_hypotheses(texts, store.N, store.M)
    results = [evaluate_hypothesis(store, h) for h in hyps]
    rep = Path(out)
    text = _write_table(rep, "sddr", reports.sddr_table(results))
    if any(r.hypothesis.kind == "identification" for r in results):
        text += "\njoint identification log SDDR (row i, column j)\n"
        text += _write_table(rep, "sddr_identification_matrix", reports.identification_matrix(results, store.N))
    dump_json({"results": [r.to_dict() for r in results], "legend": reports.EVIDENCE_LEGEND}, rep / "sddr.json")
    text += "\n" + reports.EVIDENCE_LEGEND + "\n"
    _write(rep / "sddr.txt", text)
    return results


# --------------------------------------------------------------------------
# mdd


def cmd_mdd(stores: list[tuple[str, Path]], seed: int, n_importance: int, out: Path) -> list[MddResult]:
    """Log marginal likelihood per stored model; rejects stores estimated on different data."""
    loaded = [(name, load_store(path), path) for name, path in stores]
    digests = {s.metadata.get("data_digest") for _, s, _ in loaded}
    if len(digests) != 1:
        raise ValueError("draw stores were estimated on different datasets")
    seeds = np.random.SeedSequence(seed).spawn(len(loaded))
    results = []
    for (name, store, path), sq in zip(loaded, seeds):
        data = parse_csv_text((path / "data.csv").read_text(encoding="utf-8"), str(path / "data.csv"))
        if data.digest() != store.metadata.get("data_digest"):
            raise ValueError(f"{path}: data.csv does not match the digest recorded with the draws")
        results.append(estimate_mdd(store, data, n_importance=n_importance, rng=np.random.default_rng(sq)))
    names = [n for n, _, _ in loaded]
    text = _write_table(Path(out), "mdd", reports.mdd_table(names, results))
    dump_json({"schemes": names, "results": [r.to_dict() for r in results]}, Path(out) / "mdd.json")
    _write(Path(out) / "mdd.txt", text)
    return results


# --------------------------------------------------------------------------
# identify


def cmd_identify(lambdas: np.ndarray, out: Path | None, names=(), store: DrawStore | None = None, tol: float = 1e-6) -> dict:
    """Row-wise uniqueness verdicts at a variance matrix; with a store, adds the density-ratio assessment."""
    lambdas = np.atleast_2d(np.asarray(lambdas, dtype=float))
    report = check_identification(lambdas, tol)
    names = list(names) or [f"y{n + 1}" for n in range(lambdas.shape[1])]
    sddr = None
    if store is not None and store.M > 1:
        sddr = [evaluate_hypothesis(store, h) for h in parse_hypotheses(["identification:all-pairs"], store.N, store.M)]
    d = reports.identification_dict(report, names, sddr)
    d["lambdas"] = lambdas.tolist()
    if out is not None:
        dump_json(d, Path(out) / "identification.json")
    return d


def render_identification(d: dict) -> str:
    lines = []
    if d["reason"]:
        lines.append(f"verdict: {d['reason']}")
    for name, verdict in zip(d["variables"], d["verdicts"]):
        lines.append(f"{name}: {verdict}")
    lines.append(f"all rows unique: {d['globally_unique']}")
    for r in d.get("sddr_cross_reference") or []:
        lines.append(f"{r['hypothesis']['label']}: log SDDR {r['log_sddr']:.3f} (nse {r['nse']:.3f})")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# compare


def cmd_compare(store: DrawStore, truth: dict, level: float = 0.9) -> tuple[list[str], list[list], dict]:
    """Posterior intervals against the generating parameters of a simulation."""
    params = ModelParameters.from_dict(truth["params"])
    scheme = store.scheme
    lo, hi = (1 - level) / 2, 1 - (1 - level) / 2
    true_vals = {}
    alpha = scheme.extract_alpha(params.A0)
    for k, lab in enumerate(scheme.labels):
        true_vals[f"A0:{lab}"] = alpha[k]
    N = params.N
    for n in range(N):
        true_vals[f"lambda1[{n + 1}]"] = params.lambda1[n]
        for m in range(params.M - 1):
            true_vals[f"omega[{m + 2},{n + 1}]"] = params.omega[m, n]
    for i in range(params.M):
        for j in range(params.M):
            if params.M > 1:
                true_vals[f"P[{i + 1},{j + 1}]"] = params.P[i, j]
    for n in range(N):
        true_vals[f"mu[{n + 1}]"] = params.A[n, 0]
        for lag in range(params.p):
            for j in range(N):
                true_vals[f"A{lag + 1}[{n + 1},{j + 1}]"] = params.A[n, 1 + lag * N + j]
    rows = []
    for name, x in reports.parameter_draws(store):
        if name not in true_vals:
            continue
        a, b = np.quantile(x, [lo, hi])
        t = float(true_vals[name])
        rows.append([name, t, float(x.mean()), float(a), float(b), bool(a <= t <= b)])
    extra = {"coverage": float(np.mean([r[-1] for r in rows])) if rows else None}
    if "states" in truth:
        s_true = np.asarray(truth["states"]) - 1
        probs = store.state_probs()
        if probs.shape[0] == s_true.size:
            extra["state_accuracy"] = float(np.mean(np.argmax(probs, axis=1) == s_true))
    return ["parameter", "truth", "mean", f"q{lo:g}", f"q{hi:g}", "covered"], rows, extra


# --------------------------------------------------------------------------
# argument handling


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    sampler_over = {}
    if getattr(args, "chains", None) is not None:
        sampler_over["n_chains"] = args.chains
    if getattr(args, "draws", None) is not None:
        sampler_over["n_draws"] = args.draws
    if getattr(args, "burn", None) is not None:
        sampler_over["n_burn"] = args.burn
    if sampler_over:
        cfg.sampler = replace(cfg.sampler, **sampler_over)
    if getattr(args, "scheme", None):
        cfg.scheme_preset = args.scheme
        cfg.pattern = None
        cfg.Q_path = cfg.q_path = None
    if getattr(args, "restricted_rows", None) is not None:
        cfg.restricted_rows = parse_rows(args.restricted_rows)
    if getattr(args, "out", None):
        cfg.out_dir = Path(args.out)
    return cfg


def _common(p: argparse.ArgumentParser, sampler: bool = False) -> None:
    p.add_argument("--config", help="INI run configuration")
    p.add_argument("--seed", type=int, help="override [run] seed")
    p.add_argument("--out", help="output directory")
    if sampler:
        p.add_argument("--chains", type=int, help="number of chains")
        p.add_argument("--draws", type=int, help="retained draws per chain")
        p.add_argument("--burn", type=int, help="burn-in sweeps per chain")
        p.add_argument("--scheme", help="restriction preset name")
        p.add_argument("--restricted-rows", help='"all" or comma list of 1-based rows taking the preset pattern')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svarmsh", description="Bayesian SVARs with Markov-switching heteroskedasticity")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("simulate", help="simulate a dataset and its truth file")
    _common(p)
    p.add_argument("--periods", type=int, help="observations after the presample")

    p = sub.add_parser("estimate", help="run the Gibbs sampler and write a draw store")
    _common(p, sampler=True)
    p.add_argument("--data", help="data CSV (overrides [data] path)")
    p.add_argument("--lags", type=int, help="lag order")
    p.add_argument("--states", type=int, help="number of volatility states")

    p = sub.add_parser("sddr", help="density-ratio tests on relative variances")
    _common(p)
    p.add_argument("--store", help="draw store directory (default: config output dir)")
    p.add_argument("--hypothesis", action="append", help=f"hypothesis string, repeatable (default: {', '.join(DEFAULT_HYPOTHESES)})")

    p = sub.add_parser("mdd", help="marginal data densities of one or more stored models")
    _common(p)
    p.add_argument("--store", nargs="+", help="draw store directories, optionally NAME=DIR")
    p.add_argument("--importance", type=int, default=20000, help="importance draws per model")

    p = sub.add_parser("identify", help="row-wise identification verdicts")
    _common(p)
    p.add_argument("--store", help="draw store directory (posterior mean variances)")
    p.add_argument("--lambdas", help="headerless CSV of state variances (M x N)")
    p.add_argument("--tol", type=float, default=1e-6, help="relative tolerance for equal relative variances")

    p = sub.add_parser("compare", help="posterior intervals versus a simulation truth file")
    _common(p)
    p.add_argument("--store", help="draw store directory")
    p.add_argument("--truth", required=True, help="truth.json written by simulate")
    p.add_argument("--level", type=float, default=0.9, help="interval probability")
    return parser


def _store_dir(args, cfg: RunConfig) -> Path:
    return Path(args.store) if getattr(args, "store", None) else Path(cfg.out_dir)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ValueError, FileNotFoundError, DataFormatError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    cfg = _config_from_args(args)
    if args.verb == "simulate":
        if cfg.truth_path is not None:
            params = load_truth(cfg.truth_path)
        else:
            params = default_truth()
        periods = args.periods if args.periods is not None else cfg.periods
        data, _ = cmd_simulate(params, periods, cfg.seed, Path(cfg.out_dir))
        print(f"wrote {data.n_obs} rows ({params.p} presample) to {Path(cfg.out_dir) / 'data.csv'}")
        return 0
    if args.verb == "estimate":
        if args.data:
            cfg.data_path = Path(args.data)
        if args.lags is not None:
            cfg.p = args.lags
        if args.states is not None:
            cfg.M = args.states
        if cfg.data_path is None:
            raise ValueError("no data file: give --data or [data] path")
        _, bundle = cmd_estimate(cfg)
        print(bundle["text"])
        return 0
    if args.verb == "sddr":
        sdir = _store_dir(args, cfg)
        store = load_store(sdir)
        out = Path(args.out) if args.out else sdir / "reports"
        cmd_sddr(store, args.hypothesis or DEFAULT_HYPOTHESES, out)
        print((out / "sddr.txt").read_text(encoding="utf-8"))
        return 0
    if args.verb == "mdd":
        items = args.store or [str(cfg.out_dir)]
        stores = []
        for item in items:
            name, _, path = item.rpartition("=")
            path = Path(path)
            stores.append((name or path.name, path))
        out = Path(args.out) if args.out else stores[0][1] / "reports"
        seed = cfg.seed if args.seed is not None or args.config else int(load_store(stores[0][1]).metadata.get("seed", 0))
        cmd_mdd(stores, seed, args.importance, out)
        print((out / "mdd.txt").read_text(encoding="utf-8"))
        return 0
    if args.verb == "identify":
        store = None
        if args.lambdas:
            lambdas = load_matrix_csv(args.lambdas)
            names = ()
        else:
            store = load_store(_store_dir(args, cfg))
            lambdas = posterior_lambdas_mean(store)
            names = store.metadata.get("variables", ())
        out = Path(args.out) if args.out else None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        d = cmd_identify(lambdas, out, names, store, args.tol)
        print(render_identification(d))
        return 0
    if args.verb == "compare":
        store = load_store(_store_dir(args, cfg))
        with open(args.truth, encoding="utf-8") as fh:
            truth = json.load(fh)
        header, rows, extra = cmd_compare(store, truth, args.level)
        text = reports.render_text(header, rows)
        if args.out:
            _write(Path(args.out) / "compare.csv", csv_text(header, rows))
            dump_json(extra, Path(args.out) / "compare.json")
        print(text + json.dumps(extra, sort_keys=True))
        return 0
    raise ValueError(f"unknown verb {args.verb}")


if __name__ == "__main__":
    sys.exit(main())
