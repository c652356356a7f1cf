"""Command-line driver: ``simulate``, ``fit`` and ``summarize``.

Errors are reported as a one-line JSON object on stderr with a non-zero
exit status.
"""
import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ConfigError, DataFormatError, SchemaMismatch, SingleFactorError
from .graphs import build_ar_graph, build_car_rate, neighborhood_graph
from .io import (read_matrix_csv, read_trace, summary_to_dict, write_json,
                 write_matrix_csv, write_trace)
from .latent import (CategoricalDataset, expected_cell_counts, fit_latent,
                     read_contingency_table, table_to_dataset)
from .multigroup import fit_multigroup
from .numerics import make_rng
from .sfgm import Hyperparams, Trace, fit_sfgm
from .simulation import BUILTIN_MODELS, FactorModel, builtin_model, simulate

MODELS = ("sfgm", "probit", "csfgm", "multigroup")

# stream ids of non-chain randomness, kept apart from chain indices
_STREAM_SIMULATE = 1 << 20
_STREAM_CELLS = (1 << 20) + 1


@dataclass
class RunConfig:
    model: str = "sfgm"
    data: str = None
    manifest: str = None
    structure: str = None
    chains: int = 1
    iterations: int = 2000
    burn_in: int = 500
    seed: int = 0
    hyper: dict = field(default_factory=dict)
    delta_mu: float = 3.0
    out: str = "out"

    def validate(self):
        if self.model not in MODELS:
            raise ConfigError("model must be one of %s" % (MODELS,))
        if not self.iterations > self.burn_in >= 0:
            raise ConfigError("need iterations > burn_in >= 0")
        if self.chains < 1:
            raise ConfigError("need at least one chain")
        if self.model == "multigroup":
            if not self.manifest:
                raise ConfigError("multigroup fits need a manifest")
        elif not self.data:
            raise ConfigError("no data given")
        return self


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError("cannot read config: %s" % exc) from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config is not valid JSON: %s" % exc) from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _resolve(path, base):
    if path is None or path.startswith("builtin:") or os.path.isabs(path):
        return path
    return os.path.join(base, path)


def _hyper(d, p):
    d = dict(d or {})
    D = d.pop("D", None)
    if D is not None and not isinstance(D, str):
        D = np.asarray(D, dtype=float)
    elif isinstance(D, str) and D != "identity":
        raise ConfigError("D must be 'identity' or a matrix")
    unknown = set(d) - {"n0", "c", "d", "delta", "epsilon"}
    if unknown:
        raise ConfigError("unknown hyperparameters %s" % sorted(unknown))
    try:
        return Hyperparams(D=D if not isinstance(D, str) else None, **d)
    except SingleFactorError as exc:
        raise ConfigError(str(exc)) from None


def _fixture(name):
    path = resources.files("singlefactor") / "data" / name
    if not path.is_file():
        raise ConfigError("no bundled fixture %r" % name)
    return str(path)


def _load_categorical(path):
    """Contingency table (``vars:`` header) or numeric CSV with a kinds row."""
    if path.startswith("builtin:"):
        path = _fixture(path.split(":", 1)[1] + ".txt")
    with open(path) as fh:
        head = fh.read(4096)
    if any(ln.strip().startswith("vars:") for ln in head.splitlines()):
        names, _, counts = read_contingency_table(path)
        return table_to_dataset(counts), names, counts
    X = read_matrix_csv(path)
    kinds = ["binary" if set(np.unique(c[~np.isnan(c)])) <= {0.0, 1.0} else "ordinal"
             for c in X.T]
    return CategoricalDataset(X, kinds), None, None


def _load_numeric(path):
    try:
        return read_matrix_csv(path)
    except OSError as exc:
        raise DataFormatError("cannot read data: %s" % exc) from None


# ---------------------------------------------------------------------------
# verbs

def cmd_simulate(args, cfg):
    sim_cfg = cfg.get("simulate", cfg)
    model = sim_cfg.get("model", "M1")
    n = int(sim_cfg.get("n", 100))
    if isinstance(model, str):
        if model.upper() not in BUILTIN_MODELS:
            raise ConfigError("unknown built-in model %r" % model)
        model = builtin_model(model)
    elif isinstance(model, dict):
        model = FactorModel.from_dict(model)
    else:
        raise ConfigError("model must be a name or an object")
    seed = args.seed if args.seed is not None else int(sim_cfg.get("seed", 0))
    out = args.out or sim_cfg.get("out", "out")
    os.makedirs(out, exist_ok=True)
    X = simulate(model, n, make_rng(seed, _STREAM_SIMULATE))
    write_matrix_csv(X, os.path.join(out, "data.csv"),
                     header=["X%d" % v for v in range(1, model.p + 1)])
    truth = model.to_dict()
    truth.update({"n": n, "seed": seed})
    write_json(truth, os.path.join(out, "truth.json"))
    return {"data": os.path.join(out, "data.csv"), "truth": os.path.join(out, "truth.json")}


def _run_config(args, cfg, base):
    keys = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(cfg) - keys
    if unknown:
        raise ConfigError("unknown config keys %s" % sorted(unknown))
    rc = RunConfig(**cfg)
    for name in ("model", "chains", "iterations", "burn_in", "seed", "out"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(rc, name, val)
    if args.epsilon is not None:
        rc.hyper = dict(rc.hyper, epsilon=args.epsilon)
    rc.data = _resolve(rc.data, base)
    rc.manifest = _resolve(rc.manifest, base)
    return rc.validate()


def _write_chains(traces, out, prefix=""):
    paths = []
    for c, tr in enumerate(traces):
        p = os.path.join(out, "%schain_%d.csv" % (prefix, c))
        write_trace(tr, p, os.path.join(out, "%schain_%d_K.csv" % (prefix, c)))
        paths.append(p)
    return paths


def _structure(text, L, delta_mu, base):
    if not text:
        raise ConfigError("multigroup fits need a structure ('ar:<k>' or 'spatial:<csv>:<rho>')")
    kind, _, rest = text.partition(":")
    if kind == "ar":
        try:
            order = int(rest)
        except ValueError:
            raise ConfigError("bad AR order in %r" % text) from None
        return build_ar_graph(L, order), None
    if kind == "spatial":
        path, _, rho = rest.rpartition(":")
        try:
            rho = float(rho)
        except ValueError:
            raise ConfigError("bad rho in %r" % text) from None
        if path.startswith("builtin:"):
            path = _fixture(path.split(":", 1)[1] + ".csv")
        W = read_matrix_csv(_resolve(path, base))
        if W.shape != (L, L):
            raise ConfigError("proximity matrix is %s for %d groups" % (W.shape, L))
        return neighborhood_graph(W), build_car_rate(W, rho, delta_mu)
    raise ConfigError("unknown structure %r" % text)


def cmd_fit(args, cfg, base):
    rc = _run_config(args, cfg, base)
    os.makedirs(rc.out, exist_ok=True)
    eps = rc.hyper.get("epsilon", 0.01)
    summary = {"model": rc.model, "chains": rc.chains, "iterations": rc.iterations,
               "burn_in": rc.burn_in, "seed": rc.seed}

    if rc.model == "multigroup":
        return _fit_multigroup(rc, summary, eps)

    if rc.model == "sfgm":
        X = _load_numeric(rc.data)
        if np.isnan(X).any():
            raise DataFormatError("missing values are only supported by probit/csfgm")
        hyper = _hyper(rc.hyper, X.shape[1])
        names, counts = None, None
        traces = [fit_sfgm(X, hyper, rc.iterations, rc.burn_in, rng=make_rng(rc.seed, c),
                           chain=c) for c in range(rc.chains)]
    else:
        ds, names, counts = _load_categorical(rc.data)
        hyper = _hyper(rc.hyper, ds.p)
        mode = "probit" if rc.model == "probit" else "copula"
        traces = [fit_latent(ds, mode, hyper, rc.iterations, rc.burn_in,
                             rng=make_rng(rc.seed, c), chain=c) for c in range(rc.chains)]
    paths = _write_chains(traces, rc.out)
    merged = Trace.concatenate(traces)
    summary.update(summary_to_dict(merged, eps, names))
    if rc.model != "sfgm" and counts is not None and all(k == 2 for k in counts.shape):
        thin = max(1, len(merged) // 500)
        exp = expected_cell_counts(merged, int(counts.sum()), make_rng(rc.seed, _STREAM_CELLS),
                                   thin=thin).ravel()
        obs = counts.ravel()
        top = np.argsort(-obs, kind="stable")[:5]
        summary["expected_cells"] = [
            {"cell": format(int(i), "0%db" % counts.ndim), "observed": int(obs[i]),
             "expected": float(exp[i])} for i in top]
    summary["trace_files"] = [os.path.basename(p) for p in paths]
    write_json(summary, os.path.join(rc.out, "summary.json"))
    return {"summary": os.path.join(rc.out, "summary.json"), "traces": paths}


def _fit_multigroup(rc, summary, eps):
    base = os.path.dirname(os.path.abspath(rc.manifest))
    man = _load_config(rc.manifest)
    groups = man.get("groups")
    if not groups:
        raise ConfigError("manifest lists no groups")
    mode = man.get("mode", "gaussian")
    data = []
    for g in groups:
        path = _resolve(g["path"], base)
        if mode == "gaussian":
            X = _load_numeric(path)
        else:
            X, _, _ = _load_categorical(path)
            if "kinds" in g:
                X = CategoricalDataset(X.X, g["kinds"])
        n = X.shape[0] if mode == "gaussian" else X.n
        if "n" in g and int(g["n"]) != n:
            raise DataFormatError("group %s: manifest says n=%s, file has %d" % (g.get("id"), g["n"], n))
        data.append(X)
    L = len(data)
    Gmu, Dmu = _structure(rc.structure or man.get("structure"), L, rc.delta_mu, base)
    p = data[0].shape[1] if mode == "gaussian" else data[0].p
    hyper = _hyper(rc.hyper, p)
    fits = [fit_multigroup(data, Gmu, hyper, rc.iterations, rc.burn_in, rng=make_rng(rc.seed, c),
                           chain=c, delta_mu=rc.delta_mu, Dmu=Dmu, mode=mode)
            for c in range(rc.chains)]
    ids = [str(g.get("id", l + 1)) for l, g in enumerate(groups)]
    summary["groups"] = {}
    for l, gid in enumerate(ids):
        traces = [f.groups[l] for f in fits]
        _write_chains(traces, rc.out, prefix="group_%s_" % gid)
        summary["groups"][gid] = summary_to_dict(Trace.concatenate(traces), eps)
    mu = np.concatenate([f.mu for f in fits])
    for c, f in enumerate(fits):
        write_matrix_csv(f.mu, os.path.join(rc.out, "mu_chain_%d.csv" % c),
                         header=["mu_%s" % g for g in ids])
    lo, hi = np.percentile(mu, [2.5, 97.5], axis=0)
    summary["mu"] = {"mean": mu.mean(0).tolist(), "lower": lo.tolist(), "upper": hi.tolist()}
    summary["Kmu_mean"] = np.concatenate([f.Kmu for f in fits]).mean(0).tolist()
    summary["Gmu_edges"] = [list(e) for e in Gmu.edges]
    write_json(summary, os.path.join(rc.out, "summary.json"))
    return {"summary": os.path.join(rc.out, "summary.json")}


def cmd_summarize(args, cfg):
    paths = list(args.traces) or list(cfg.get("traces", []))
    if not paths:
        raise ConfigError("no trace files given")
    eps = args.epsilon if args.epsilon is not None else float(cfg.get("epsilon", 0.01))
    burn = args.burn_in or 0
    traces = []
    for c, path in enumerate(paths):
        k_path = path[:-4] + "_K.csv" if path.endswith(".csv") else None
        if k_path and not os.path.exists(k_path):
            k_path = None
        try:
            tr = read_trace(path, k_path, chain=c)
        except OSError as exc:
            raise DataFormatError("cannot read trace: %s" % exc) from None
        traces.append(tr.select(tr.iteration >= burn))
    p = {t.p for t in traces}
    if len(p) != 1 or len({"cuts" in t.extra for t in traces}) != 1:
        raise SchemaMismatch("trace files do not share a schema")
    merged = Trace.concatenate(traces)
    out = args.out or cfg.get("out", ".")
    os.makedirs(out, exist_ok=True)
    summary = summary_to_dict(merged, eps)
    summary["trace_files"] = [os.path.basename(p) for p in paths]
    write_json(summary, os.path.join(out, "summary.json"))
    return {"summary": os.path.join(out, "summary.json"), "n_draws": len(merged)}


def build_parser():
    ap = argparse.ArgumentParser(prog="singlefactor",
                                 description="Bayesian single-factor graphical models")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")

    s = sub.add_parser("simulate", help="draw a synthetic dataset")
    common(s)
    f = sub.add_parser("fit", help="run MCMC chains")
    common(f)
    f.add_argument("--model", choices=MODELS)
    f.add_argument("--chains", type=int)
    f.add_argument("--iterations", type=int)
    f.add_argument("--burn-in", dest="burn_in", type=int)
    f.add_argument("--epsilon", type=float)
    m = sub.add_parser("summarize", help="merge chain traces into a summary")
    common(m)
    m.add_argument("traces", nargs="*")
    m.add_argument("--burn-in", dest="burn_in", type=int,
                   help="drop draws with a smaller iteration index")
    m.add_argument("--epsilon", type=float)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        base = os.path.dirname(os.path.abspath(args.config)) if args.config else os.getcwd()
        if args.verb == "simulate":
            res = cmd_simulate(args, cfg)
        elif args.verb == "fit":
            res = cmd_fit(args, cfg, base)
        else:
            res = cmd_summarize(args, cfg)
    except SingleFactorError as exc:
        sys.stderr.write(json.dumps({"error": exc.code, "message": str(exc)}) + "\n")
        return 2
    except (OSError, KeyError, TypeError, ValueError) as exc:
        sys.stderr.write(json.dumps({"error": "error", "message": "%s: %s"
                                     % (type(exc).__name__, exc)}) + "\n")
        return 1
    sys.stdout.write(json.dumps(res) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
