"""Configuration-driven pipeline: build or load a graph, train the diffusion
backbone, estimate the switch fraction, select the switch step, generate
switched samples alongside a paired no-switch control, evaluate link
prediction on every sample against the original split, and write reports.

Every stage persists its artifact in the output directory and is resumable:
subcommands load what exists and recompute only what is missing, and all
randomness derives from the master seed, so identical configurations yield
byte-identical reports.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _ot
from .diffusion import (
    NoiseSchedule,
    OracleDenoiser,
    TrainConfig,
    denoiser_from_json,
    denoiser_to_json,
    schedule_from_json,
    schedule_to_json,
    train_denoiser,
)
from .evaluate import (
    PairSet,
    PredictorConfig,
    LinkPredictor,
    auc,
    fairness_metrics,
    full_universe,
    pareto_frontier,
    split_edges,
    train_link_predictor,
    wasserstein1_empirical,
)
from .fgw import edge_entropy, fgw_between
from .graphs import (
    Graph,
    clustering_coefficients,
    degrees,
    edge_density_matrix,
    graph_from_json,
    graph_to_json,
    load_graph,
    sbm_generate,
)
from .seeds import derive_seed
from .selector import FGW_MAX_ITER, FGW_TOL, select_tau
from .switching import (
    SwitchDistribution,
    generate_with_switching,
    optimal_rho,
    switch_coefficients,
)

logger = logging.getLogger(__name__)

# per-stage random-stream tags hashed with the master seed
_STREAM_SPLIT = 1
_STREAM_DENOISER = 2
_STREAM_TAU = 4
_STREAM_SAMPLE = 5
_STREAM_PREDICTOR = 7

REPORT_COLUMNS = [
    "run_id",
    "rho",
    "tau",
    "dist",
    "seed",
    "auc",
    "delta_sp",
    "delta_eo",
    "H",
    "fgw",
    "w1_degree",
    "w1_clustering",
]


class PipelineError(RuntimeError):
    """Stage failure; carries the stage name for the partial-state dump."""

    def __init__(self, stage, cause):
        super().__init__(f"pipeline stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "run"
    world: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=lambda: {"steps": 3, "terminal_retention": 0.02})
    denoiser: dict = field(default_factory=lambda: {"kind": "learned", "epochs": 400, "learning_rate": 1.0})
    switch: dict = field(
        default_factory=lambda: {
            "dist": "uniform",
            "gamma": 0.5,
            "tau_samples": 5,
            "rho": None,
            "tau": None,
            "fgw_alpha": 0.5,
        }
    )
    eval: dict = field(
        default_factory=lambda: {
            "threshold": 0.5,
            "embed_dim": 16,
            "epochs": 200,
            "learning_rate": 1.0,
            "include_sensitive_feature": False,
            "pair_universe": "full",
            "split": [0.85, 0.05, 0.10],
        }
    )
    n_samples: int = 10

    @classmethod
    def from_json(cls, doc):
        cfg = cls()
        for key in ("seed", "out_dir", "world", "n_samples"):
            if key in doc:
                setattr(cfg, key, doc[key])
        for key in ("schedule", "denoiser", "switch", "eval"):
            getattr(cfg, key).update(doc.get(key, {}))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def validate(self):
        present = [k for k in ("sbm", "files") if k in self.world]
        if len(present) != 1:
            raise ValueError("config world must contain exactly one of 'sbm' or 'files'")
        if not 0.0 <= self.switch["gamma"] <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.switch.get("rho") is not None and not 0.0 <= self.switch["rho"] <= 1.0:
            raise ValueError("rho override must lie in [0, 1]")
        steps = self.schedule["steps"]
        if self.switch.get("tau") is not None and not 1 <= self.switch["tau"] <= steps - 1:
            raise ValueError(f"tau override must lie in [1, {steps - 1}]")
        if self.switch["dist"] not in ("uniform", "prior"):
            raise ValueError("dist must be 'uniform' or 'prior'")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


def _dump_json(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _stage(name, stages_done, out_dir, fn):
    try:
        result = fn()
    except Exception as exc:
        _dump_json(
            {"failed_stage": name, "error": str(exc), "completed": stages_done},
            os.path.join(out_dir, "partial_state.json"),
        )
        raise PipelineError(name, exc) from exc
    stages_done.append(name)
    return result


def ensure_world(cfg, out_dir):
    path = os.path.join(out_dir, "world.json")
    if os.path.exists(path):
        return graph_from_json(_load_json(path))
    if "sbm" in cfg.world:
        spec = cfg.world["sbm"]
        g = sbm_generate(
            spec["counts"], np.asarray(spec["density"]), spec.get("feature_arity", []), spec.get("seed", cfg.seed)
        )
    else:
        g = load_graph(cfg.world["files"]["edges"], cfg.world["files"]["attributes"])
    _dump_json(graph_to_json(g), path)
    return g


def ensure_split(cfg, out_dir, world):
    path = os.path.join(out_dir, "split.json")
    if os.path.exists(path):
        doc = _load_json(path)
        return (
            graph_from_json(doc["train_graph"]),
            PairSet(np.asarray(doc["val_pairs"]), np.asarray(doc["val_labels"]), "balanced-negative"),
            PairSet(np.asarray(doc["test_pairs"]), np.asarray(doc["test_labels"]), "balanced-negative"),
        )
    split = split_edges(world, derive_seed(cfg.seed, _STREAM_SPLIT), tuple(cfg.eval["split"]))
    _dump_json(
        {
            "train_graph": graph_to_json(split.train_graph),
            "val_pairs": split.val.pairs.tolist(),
            "val_labels": split.val.labels.tolist(),
            "test_pairs": split.test.pairs.tolist(),
            "test_labels": split.test.labels.tolist(),
        },
        path,
    )
    return split.train_graph, split.val, split.test


def ensure_denoiser(cfg, out_dir, train_graph):
    path = os.path.join(out_dir, "denoiser.json")
    if os.path.exists(path):
        doc = _load_json(path)
        return denoiser_from_json(doc["denoiser"]), schedule_from_json(doc["schedule"])
    sched = NoiseSchedule.from_graph(
        train_graph, steps=cfg.schedule["steps"], terminal_retention=cfg.schedule["terminal_retention"]
    )
    if cfg.denoiser["kind"] == "oracle":
        den = OracleDenoiser.from_graph(train_graph)
    else:
        den = train_denoiser(
            train_graph,
            sched,
            TrainConfig(epochs=cfg.denoiser["epochs"], learning_rate=cfg.denoiser["learning_rate"]),
            seed=derive_seed(cfg.seed, _STREAM_DENOISER),
        )
    _dump_json({"denoiser": denoiser_to_json(den), "schedule": schedule_to_json(sched)}, path)
    return den, sched


def _switch_distribution(cfg, denoiser, n_classes):
    if cfg.switch["dist"] == "uniform":
        return SwitchDistribution.uniform(n_classes)
    return SwitchDistribution.prior(denoiser.class_marginals)


def ensure_rho(cfg, out_dir, train_graph, denoiser):
    path = os.path.join(out_dir, "rho.json")
    if os.path.exists(path):
        return _load_json(path)
    dm = edge_density_matrix(train_graph)
    dist = _switch_distribution(cfg, denoiser, train_graph.n_classes)
    model = switch_coefficients(dm.counts_per_class, dm, dist)
    rho_star = optimal_rho(model)
    doc = {
        "rho_star": rho_star,
        "rho_used": cfg.switch["rho"] if cfg.switch["rho"] is not None else rho_star,
        "override": cfg.switch["rho"],
        "coefficients": {
            "r2": model.r2,
            "r1": model.r1,
            "r0": model.r0,
            "r2_int": model.r2_int,
            "r1_int": model.r1_int,
            "r2_ext": model.r2_ext,
            "r1_ext": model.r1_ext,
            "e_int": model.e_int,
            "e_ext": model.e_ext,
        },
    }
    _dump_json(doc, path)
    return doc


def ensure_tau(cfg, out_dir, world, denoiser, sched, rho_used, dist):
    path = os.path.join(out_dir, "tau_table.json")
    if os.path.exists(path):
        return _load_json(path)
    if cfg.switch["tau"] is not None:
        doc = {"tau_star": cfg.switch["tau"], "override": True, "rows": []}
        _dump_json(doc, path)
        return doc
    table = select_tau(
        denoiser,
        sched,
        world,
        rho_used,
        dist,
        gamma=cfg.switch["gamma"],
        samples=cfg.switch["tau_samples"],
        seed=derive_seed(cfg.seed, _STREAM_TAU),
        alpha=cfg.switch["fgw_alpha"],
        attrs=world.sensitive,
    )
    table.to_csv(os.path.join(out_dir, "tau_table.csv"))
    doc = table.to_json()
    doc["override"] = False
    _dump_json(doc, path)
    return doc


def ensure_samples(cfg, out_dir, world, denoiser, sched, rho_used, tau_star, dist):
    os.makedirs(os.path.join(out_dir, "samples"), exist_ok=True)
    switched, controls = [], []
    for k in range(cfg.n_samples):
        seed_k = derive_seed(cfg.seed, _STREAM_SAMPLE, k)
        spath = os.path.join(out_dir, "samples", f"sample_{k}.json")
        cpath = os.path.join(out_dir, "samples", f"control_{k}.json")
        if os.path.exists(spath):
            sdoc = _load_json(spath)
            graph, plan_doc = graph_from_json(sdoc["graph"]), sdoc["plan"]
        else:
            graph, plan = generate_with_switching(
                denoiser, sched, world.n_nodes, rho_used, tau_star, dist, seed_k, attrs=world.sensitive
            )
            plan_doc = plan.to_json()
            _dump_json({"graph": graph_to_json(graph), "plan": plan_doc, "seed": seed_k}, spath)
        if os.path.exists(cpath):
            control = graph_from_json(_load_json(cpath)["graph"])
        else:
            control, _ = generate_with_switching(
                denoiser, sched, world.n_nodes, 0.0, tau_star, dist, seed_k, attrs=world.sensitive
            )
            _dump_json({"graph": graph_to_json(control), "plan": None, "seed": seed_k}, cpath)
        switched.append((graph, plan_doc, seed_k))
        controls.append((control, seed_k))
    return switched, controls


def _evaluate_sample(cfg, sample, world, test_pairs, fairness_pairs, predictor_seed, alpha):
    hyper = PredictorConfig(
        embed_dim=cfg.eval["embed_dim"],
        epochs=cfg.eval["epochs"],
        learning_rate=cfg.eval["learning_rate"],
        include_sensitive=cfg.eval["include_sensitive_feature"],
    )
    predictor = train_link_predictor(sample, hyper, seed=predictor_seed)
    test_scores = predictor.scores(sample, test_pairs)
    fair_scores = predictor.scores(sample, fairness_pairs)
    delta_sp, delta_eo = fairness_metrics(
        fair_scores, fairness_pairs, world.sensitive, threshold=cfg.eval["threshold"]
    )
    metrics = {
        "auc": 100.0 * auc(test_scores, test_pairs.labels),
        "delta_sp": delta_sp,
        "delta_eo": delta_eo,
        "H": edge_entropy(sample).total,
        "fgw": fgw_between(world, sample, alpha=alpha, tol=FGW_TOL, max_iter=FGW_MAX_ITER).objective,
        "w1_degree": wasserstein1_empirical(degrees(world), degrees(sample)),
        "w1_clustering": wasserstein1_empirical(
            clustering_coefficients(world), clustering_coefficients(sample)
        ),
    }
    return metrics, predictor


def _aggregate(rows):
    keys = ["auc", "delta_sp", "delta_eo", "H", "fgw", "w1_degree", "w1_clustering"]
    out = {}
    for key in keys:
        vals = np.array([r[key] for r in rows])
        out[key] = {"mean": float(vals.mean()), "std": float(vals.std(ddof=1)) if len(vals) > 1 else 0.0}
    return out


def _write_report(cfg, out_dir, rho_doc, tau_doc, sample_rows, control_rows):
    def csv_value(v):
        return repr(v) if isinstance(v, float) else str(v)

    csv_path = os.path.join(out_dir, "report.csv")
    with open(csv_path, "w") as fh:
        fh.write(",".join(REPORT_COLUMNS) + "\n")
        for row in sample_rows + control_rows:
            fh.write(",".join(csv_value(row[c]) for c in REPORT_COLUMNS) + "\n")
        for name, rows in (("switched", sample_rows), ("control", control_rows)):
            agg = _aggregate(rows)
            for stat in ("mean", "std"):
                cells = [f"{name}_{stat}", "", "", "", ""]
                cells += [repr(agg[k][stat]) for k in ("auc", "delta_sp", "delta_eo", "H", "fgw", "w1_degree", "w1_clustering")]
                fh.write(",".join(cells) + "\n")

    doc = {
        "config": asdict(cfg),
        "rho": rho_doc,
        "tau": tau_doc,
        "samples": sample_rows,
        "controls": control_rows,
        "aggregates": {"switched": _aggregate(sample_rows), "control": _aggregate(control_rows)},
    }
    _dump_json(doc, os.path.join(out_dir, "report.json"))
    return doc


def run_pipeline(cfg):
    """Execute every stage and return the report document."""
    out_dir = cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    stages_done = []
    logger.info("linear-OT backend: %s", _ot.backend_name())

    world = _stage("world", stages_done, out_dir, lambda: ensure_world(cfg, out_dir))
    train_graph, _, test_pairs = _stage(
        "split", stages_done, out_dir, lambda: ensure_split(cfg, out_dir, world)
    )
    denoiser, sched = _stage(
        "denoiser", stages_done, out_dir, lambda: ensure_denoiser(cfg, out_dir, train_graph)
    )
    rho_doc = _stage("rho", stages_done, out_dir, lambda: ensure_rho(cfg, out_dir, train_graph, denoiser))
    rho_used = rho_doc["rho_used"]
    dist = _switch_distribution(cfg, denoiser, train_graph.n_classes)
    tau_doc = _stage(
        "tau",
        stages_done,
        out_dir,
        lambda: ensure_tau(cfg, out_dir, world, denoiser, sched, rho_used, dist),
    )
    tau_star = tau_doc["tau_star"]
    switched, controls = _stage(
        "generate",
        stages_done,
        out_dir,
        lambda: ensure_samples(cfg, out_dir, world, denoiser, sched, rho_used, tau_star, dist),
    )

    def eval_stage():
        if cfg.eval["pair_universe"] == "full":
            fairness_pairs = full_universe(world)
        else:
            fairness_pairs = test_pairs
        alpha = cfg.switch["fgw_alpha"]
        sample_rows, control_rows = [], []
        for k, ((graph, plan_doc, seed_k), (control, _)) in enumerate(zip(switched, controls)):
            pseed = derive_seed(cfg.seed, _STREAM_PREDICTOR, k)
            for arm, g_arm, rho_arm in (("switched", graph, rho_used), ("control", control, 0.0)):
                metrics, predictor = _evaluate_sample(
                    cfg, g_arm, world, test_pairs, fairness_pairs, pseed, alpha
                )
                row = {
                    "run_id": f"{arm}_{k}",
                    "rho": float(rho_arm),
                    "tau": int(tau_star),
                    "dist": cfg.switch["dist"],
                    "seed": seed_k,
                    **metrics,
                }
                (sample_rows if arm == "switched" else control_rows).append(row)
                _dump_json(
                    {"weights": predictor.weights.tolist(), "config": asdict(predictor.config)},
                    os.path.join(out_dir, "samples", f"predictor_{arm}_{k}.json"),
                )
        return sample_rows, control_rows

    sample_rows, control_rows = _stage("eval", stages_done, out_dir, eval_stage)
    return _stage(
        "report",
        stages_done,
        out_dir,
        lambda: _write_report(cfg, out_dir, rho_doc, tau_doc, sample_rows, control_rows),
    )


def _apply_overrides(cfg, args):
    if args.out:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.samples is not None:
        cfg.n_samples = args.samples
    if args.rho is not None:
        cfg.switch["rho"] = args.rho
    if args.tau is not None:
        cfg.switch["tau"] = args.tau
    if args.dist is not None:
        cfg.switch["dist"] = args.dist
    if args.gamma is not None:
        cfg.switch["gamma"] = args.gamma
    cfg.validate()
    return cfg


def _cmd_synth(cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)
    world = ensure_world(cfg, cfg.out_dir)
    edge_path = os.path.join(cfg.out_dir, "edges.tsv")
    attr_path = os.path.join(cfg.out_dir, "attributes.csv")
    with open(edge_path, "w") as fh:
        for u, v in world.edge_list():
            fh.write(f"{u}\t{v}\n")
    with open(attr_path, "w") as fh:
        fh.write("node_id,sensitive," + ",".join(f"f{i}" for i in range(world.n_features)) + "\n")
        for i in range(world.n_nodes):
            feats = ",".join(str(x) for x in world.features[i])
            fh.write(f"{i},{world.sensitive[i]}" + ("," + feats if world.n_features else "") + "\n")
    print(f"world: {world.n_nodes} nodes, {world.n_edges} edges -> {cfg.out_dir}")


def _cmd_train(cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)
    world = ensure_world(cfg, cfg.out_dir)
    train_graph, _, _ = ensure_split(cfg, cfg.out_dir, world)
    ensure_denoiser(cfg, cfg.out_dir, train_graph)
    print(f"denoiser checkpoint -> {os.path.join(cfg.out_dir, 'denoiser.json')}")


def _cmd_rho(cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)
    world = ensure_world(cfg, cfg.out_dir)
    train_graph, _, _ = ensure_split(cfg, cfg.out_dir, world)
    denoiser, _ = ensure_denoiser(cfg, cfg.out_dir, train_graph)
    doc = ensure_rho(cfg, cfg.out_dir, train_graph, denoiser)
    print(f"rho_star = {doc['rho_star']:.6f} (used: {doc['rho_used']:.6f})")


def _cmd_tau(cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)
    world = ensure_world(cfg, cfg.out_dir)
    train_graph, _, _ = ensure_split(cfg, cfg.out_dir, world)
    denoiser, sched = ensure_denoiser(cfg, cfg.out_dir, train_graph)
    rho_doc = ensure_rho(cfg, cfg.out_dir, train_graph, denoiser)
    dist = _switch_distribution(cfg, denoiser, train_graph.n_classes)
    doc = ensure_tau(cfg, cfg.out_dir, world, denoiser, sched, rho_doc["rho_used"], dist)
    print(f"tau_star = {doc['tau_star']}")


def _cmd_generate(cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)
    world = ensure_world(cfg, cfg.out_dir)
    train_graph, _, _ = ensure_split(cfg, cfg.out_dir, world)
    denoiser, sched = ensure_denoiser(cfg, cfg.out_dir, train_graph)
    rho_doc = ensure_rho(cfg, cfg.out_dir, train_graph, denoiser)
    dist = _switch_distribution(cfg, denoiser, train_graph.n_classes)
    tau_doc = ensure_tau(cfg, cfg.out_dir, world, denoiser, sched, rho_doc["rho_used"], dist)
    ensure_samples(cfg, cfg.out_dir, world, denoiser, sched, rho_doc["rho_used"], tau_doc["tau_star"], dist)
    print(f"{cfg.n_samples} switched + control samples -> {os.path.join(cfg.out_dir, 'samples')}")


def _cmd_pipeline(cfg):
    doc = run_pipeline(cfg)
    agg = doc["aggregates"]
    print(f"report -> {os.path.join(cfg.out_dir, 'report.csv')}")
    for arm in ("switched", "control"):
        a = agg[arm]
        print(
            f"{arm}: AUC {a['auc']['mean']:.2f}±{a['auc']['std']:.2f}  "
            f"dSP {a['delta_sp']['mean']:.2f}±{a['delta_sp']['std']:.2f}  "
            f"dEO {a['delta_eo']['mean']:.2f}±{a['delta_eo']['std']:.2f}"
        )


def _cmd_pareto(args):
    rows = []
    with open(args.report) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            cells = dict(zip(header, line.strip().split(",")))
            if cells["run_id"].endswith("_mean") or cells["run_id"].endswith("_std"):
                continue
            rows.append(cells)
    metric = "delta_sp" if args.metric == "sp" else "delta_eo"
    points = np.array([[float(r["auc"]), 100.0 - float(r[metric])] for r in rows])
    frontier = pareto_frontier(points)
    doc = {
        "metric": metric,
        "points": [
            {"run_id": rows[i]["run_id"], "auc": points[i, 0], "fairness": points[i, 1],
             "on_frontier": bool(i in set(frontier.tolist()))}
            for i in range(len(rows))
        ],
    }
    out = args.out or os.path.join(os.path.dirname(args.report), "pareto.json")
    _dump_json(doc, out)
    print(f"frontier: {[rows[i]['run_id'] for i in frontier]} -> {out}")
    if args.svg:
        try:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError as exc:
            raise SystemExit("SVG output requires matplotlib (install extra 'plot')") from exc
        on = np.zeros(len(rows), dtype=bool)
        on[frontier] = True
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.scatter(points[~on, 0], points[~on, 1], color="tab:blue", label="dominated")
        ax.scatter(points[on, 0], points[on, 1], color="tab:red", label="frontier")
        ax.set_xlabel("AUC")
        ax.set_ylabel(f"100 - {metric}")
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.svg)
        print(f"scatter -> {args.svg}")


def build_parser():
    parser = argparse.ArgumentParser(prog="fairswitch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--samples", type=int, help="number of generated samples")
        p.add_argument("--rho", type=float, help="switch fraction override")
        p.add_argument("--tau", type=int, help="switch step override")
        p.add_argument("--dist", choices=["uniform", "prior"], help="switch distribution")
        p.add_argument("--gamma", type=float, help="fairness weight in the step objective")

    for name in ("synth", "train", "rho", "tau", "generate", "eval", "pipeline"):
        add_common(sub.add_parser(name))

    pareto = sub.add_parser("pareto")
    pareto.add_argument("--report", required=True, help="report.csv from a pipeline run")
    pareto.add_argument("--metric", choices=["sp", "eo"], default="sp")
    pareto.add_argument("--out", help="output JSON path")
    pareto.add_argument("--svg", help="write a scatter SVG here")
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "pareto":
        _cmd_pareto(args)
        return 0
    cfg = _apply_overrides(RunConfig.load(args.config), args)
    commands = {
        "synth": _cmd_synth,
        "train": _cmd_train,
        "rho": _cmd_rho,
        "tau": _cmd_tau,
        "generate": _cmd_generate,
        "eval": _cmd_pipeline,
        "pipeline": _cmd_pipeline,
    }
    commands[args.command](cfg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
