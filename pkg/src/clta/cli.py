"""Command-line surface: gen / train / eval / gradcheck / ablate / dump-attention.

Exit codes: 0 success, 1 usage error, 2 runtime error. A plain key=value
file passed with --config supplies defaults; explicit flags override it.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io_files, synth
from .episodes import EpisodeSpec, run_episodes
from .errors import CltaError, ConfigError
from .model import Model, ModelConfig, loss_and_grads
from .numerics import finite_diff_check
from .trainer import TrainConfig, train


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="clta", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", type=str, default=None,
                       help="key=value file with defaults; flags override")
        p.add_argument("--deterministic-output", action="store_true",
                       help="suppress timestamp comment lines in result CSVs")

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mode", choices=["instance_shifted", "fixed_position"],
                   default="instance_shifted")
    p.add_argument("--classes", type=int, default=30)
    p.add_argument("--videos-per-class", type=int, default=30)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--t-min", type=int, default=12)
    p.add_argument("--t-max", type=int, default=40)
    p.add_argument("--window-len", type=int, default=6)
    p.add_argument("--amp", type=float, default=0.3)
    p.add_argument("--cue", type=float, default=0.3,
                   help="class-independent in-window cue amplitude")
    p.add_argument("--noise", type=float, default=0.12)

    def train_flags(p):
        p.add_argument("--model", choices=["clta", "avg", "selfattn", "tsf", "sldg"],
                       default="clta")
        p.add_argument("--classifier", choices=["softmax", "cosine"], default="softmax")
        p.add_argument("--fusion", choices=["average", "soft"], default="average")
        p.add_argument("--k-gaussians", type=int, default=6)
        p.add_argument("--beta", type=float, default=1e3)
        p.add_argument("--projection-stage", choices=["pre", "post"], default="post")
        p.add_argument("--hidden", type=int, default=64)
        p.add_argument("--batch-norm", action="store_true")
        p.add_argument("--epochs", type=int, default=60)
        p.add_argument("--lr", type=float, default=2e-3)
        p.add_argument("--decay-every", type=int, default=50,
                       help="halve the learning rate every this many epochs")
        p.add_argument("--batch-size", type=int, default=128)
        p.add_argument("--dropout", type=float, default=0.0)

    p = sub.add_parser("train", help="train an attention model on the base classes")
    common(p)
    p.add_argument("--data", required=True, help="manifest CSV path")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--log", default=None, help="training log CSV path")
    train_flags(p)

    def eval_flags(p):
        p.add_argument("--n-way", type=int, default=5)
        p.add_argument("--k-shot", type=int, default=1)
        p.add_argument("--episodes", type=int, default=600)
        p.add_argument("--head", choices=["same", "softmax", "cosine"], default="same")

    p = sub.add_parser("eval", help="episodic n-way k-shot evaluation")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default=None, help="result CSV path (default stdout only)")
    eval_flags(p)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    common(p)
    p.add_argument("--beta", type=float, default=10.0,
                   help="soft-argmax scale for the checked model")
    p.add_argument("--eps", type=float, default=1e-5)

    p = sub.add_parser("ablate", help="sweep one factor and evaluate each setting")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="sweep result CSV path")
    p.add_argument("--sweep", choices=["k", "beta", "fusion", "classifier"], required=True)
    train_flags(p)
    eval_flags(p)

    p = sub.add_parser("dump-attention", help="per-video attention trace CSVs")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    return parser


def _apply_config_file(parser, args, argv):
    """Fill args from a key=value file for flags not given on the CLI."""
    if not args.config:
        return
    text = Path(args.config).read_text()
    actions = {}
    for sp in parser._subparsers._group_actions[0].choices.values():
        if sp.prog.endswith(args.command):
            for a in sp._actions:
                actions[a.dest] = a
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{args.config}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        dest = key.strip().replace("-", "_")
        value = value.strip()
        action = actions.get(dest)
        if action is None or dest in ("config",):
            raise ConfigError(f"{args.config}:{lineno}: unknown key {key.strip()!r}")
        if any(opt in argv for opt in action.option_strings):
            continue  # explicit flag wins
        if isinstance(action, argparse._StoreTrueAction):
            setattr(args, dest, value.lower() in ("1", "true", "yes"))
        else:
            setattr(args, dest, action.type(value) if action.type else value)


# -- subcommand bodies ----------------------------------------------------------


def _cmd_gen(args) -> int:
    cfg = synth.SynthConfig(
        num_classes=args.classes, videos_per_class=args.videos_per_class,
        d=args.dim, t_min=args.t_min, t_max=args.t_max,
        window_len=args.window_len, signal_amp=args.amp, cue_amp=args.cue,
        noise_std=args.noise, mode=args.mode, seed=args.seed)
    dataset = synth.generate(cfg)
    out = Path(args.out)
    (out / "features").mkdir(parents=True, exist_ok=True)
    rows = []
    for seq in dataset.sequences:
        rel = f"features/{seq.video_id}.fvf"
        io_files.write_feature_file(out / rel, seq.features)
        rows.append(dict(video_id=seq.video_id, label=seq.label,
                         split=dataset.split_of[seq.video_id], path=rel))
    io_files.write_manifest(out / "manifest.csv", rows)
    summary = synth.describe(dataset)
    for name, s in summary.splits.items():
        print(f"{name}: {s.num_classes} classes, {s.num_videos} videos, max T {s.max_length}")
    print(f"Z = {summary.Z}")
    return 0


def _load_splits(manifest):
    return (io_files.load_split(manifest, "train"),
            io_files.load_split(manifest, "val"),
            io_files.load_split(manifest, "test"))


def _train_model(args, train_seqs, val_seqs):
    if not train_seqs:
        raise ConfigError("training split is empty")
    Z = max(s.T for s in train_seqs)
    labels = sorted({s.label for s in train_seqs})
    lab2idx = {c: i for i, c in enumerate(labels)}
    mcfg = ModelConfig(
        kind=args.model, classifier=args.classifier,
        fusion="soft_weight" if args.fusion == "soft" else "average",
        num_gaussians=args.k_gaussians, beta=args.beta, Z=Z,
        feature_dim=train_seqs[0].d, hidden=args.hidden,
        num_classes=len(labels), projection_stage=args.projection_stage,
        dropout=args.dropout, batch_norm=args.batch_norm)
    model = Model(mcfg, np.random.default_rng(args.seed))
    tcfg = TrainConfig(lr0=args.lr, decay_every=args.decay_every,
                       batch_size=args.batch_size, epochs=args.epochs,
                       dropout_rate=args.dropout, seed=args.seed)
    pairs = [(s.features, lab2idx[s.label]) for s in train_seqs]
    # val classes are disjoint from the base classes, so epoch selection uses
    # a small episodic probe on the val split instead of plain accuracy
    val_metric = None
    if val_seqs:
        val_classes = {s.label for s in val_seqs}
        probe = EpisodeSpec(n_way=min(5, len(val_classes)), k_shot=1,
                            num_episodes=24, retrain_epochs=40, seed=args.seed)

        def val_metric(m):
            return run_episodes(m, val_seqs, probe).mean_acc

    log = train(model, pairs, tcfg, val_metric=val_metric)
    return model, labels, log


def _cmd_train(args) -> int:
    train_seqs, val_seqs, _ = _load_splits(args.data)
    model, labels, log = _train_model(args, train_seqs, val_seqs)
    meta = dict(model_config=model.config_dict(), labels=labels,
                bn_mean=model.bn_mean.tolist(), bn_var=model.bn_var.tolist())
    io_files.save_checkpoint(args.out, model.params, meta)
    if args.log:
        io_files.write_csv(
            args.log, ["epoch", "lr", "train_loss", "train_acc", "val_acc"],
            [[r.epoch, f"{r.lr:.10g}", f"{r.train_loss:.10g}", f"{r.train_acc:.6f}",
              "" if r.val_acc is None else f"{r.val_acc:.6f}"] for r in log],
            deterministic=args.deterministic_output)
    final = log[-1] if log else None
    if final:
        print(f"final epoch {final.epoch}: loss {final.train_loss:.4f}, "
              f"train acc {final.train_acc:.3f}")
    print(f"checkpoint written to {args.out}")
    return 0


def _load_model(checkpoint) -> Model:
    if not Path(checkpoint).exists():
        raise ConfigError(f"checkpoint not found: {checkpoint}")
    params, meta = io_files.load_checkpoint(checkpoint)
    model = Model.from_config(meta["model_config"], params)
    model.bn_mean = np.asarray(meta.get("bn_mean", model.bn_mean))
    model.bn_var = np.asarray(meta.get("bn_var", model.bn_var))
    return model


def _cmd_eval(args) -> int:
    model = _load_model(args.checkpoint)
    test_seqs = io_files.load_split(args.data, "test")
    spec = EpisodeSpec(n_way=args.n_way, k_shot=args.k_shot,
                       num_episodes=args.episodes, seed=args.seed, head=args.head)
    summary = run_episodes(model, test_seqs, spec)
    row = [model.cfg.kind, args.n_way, args.k_shot, args.episodes,
           f"{summary.mean_acc:.6f}", f"{summary.ci95:.6f}", args.seed]
    print(",".join(str(x) for x in row))
    if args.out:
        io_files.write_csv(args.out,
                           ["model", "n_way", "k_shot", "num_episodes",
                            "mean_acc", "ci95", "seed"],
                           [row], deterministic=args.deterministic_output)
    return 0


def gradcheck_batch(seed: int, beta: float):
    """Seeded small model + batch used by the gradcheck subcommand."""
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(kind="clta", classifier="softmax", fusion="soft_weight",
                      num_gaussians=2, beta=beta, Z=6, feature_dim=4, hidden=8,
                      num_classes=3, dropout=0.0)
    model = Model(cfg, rng)
    # classifier weights must be nonzero for gradients to reach the attention
    model.params["cls_W"] = rng.standard_normal(model.params["cls_W"].shape) * 0.5
    model.params["cls_b"] = rng.standard_normal(model.params["cls_b"].shape) * 0.1
    batch = [(rng.standard_normal((t, 4)), int(rng.integers(0, 3)))
             for t in (3, 4, 5)]
    return model, batch


def _cmd_gradcheck(args) -> int:
    model, batch = gradcheck_batch(args.seed, args.beta)

    def loss_fn(params):
        model.params = params
        loss, grads = loss_and_grads(model, batch, train=False)
        return loss, grads

    err = finite_diff_check(loss_fn, model.params, eps=args.eps)
    print(f"max relative gradient error: {err:.3e}")
    return 0 if err < 1e-4 else 2


_SWEEPS = {
    "k": ("k_gaussians", [3, 6, 9]),
    "beta": ("beta", [1e1, 1e2, 1e3]),
    "fusion": ("fusion", ["average", "soft"]),
    "classifier": ("classifier", ["softmax", "cosine"]),
}


def _cmd_ablate(args) -> int:
    train_seqs, val_seqs, test_seqs = _load_splits(args.data)
    attr, values = _SWEEPS[args.sweep]
    rows = []
    for value in values:
        setattr(args, attr, value)
        model, _, _ = _train_model(args, train_seqs, val_seqs)
        spec = EpisodeSpec(n_way=args.n_way, k_shot=args.k_shot,
                           num_episodes=args.episodes, seed=args.seed, head=args.head)
        summary = run_episodes(model, test_seqs, spec)
        rows.append([args.sweep, value, args.n_way, args.k_shot, args.episodes,
                     f"{summary.mean_acc:.6f}", f"{summary.ci95:.6f}", args.seed])
        print(f"{args.sweep}={value}: {summary.mean_acc:.4f} +- {summary.ci95:.4f}")
    io_files.write_csv(args.out,
                       ["sweep", "value", "n_way", "k_shot", "num_episodes",
                        "mean_acc", "ci95", "seed"],
                       rows, deterministic=args.deterministic_output)
    return 0


def _cmd_dump_attention(args) -> int:
    model = _load_model(args.checkpoint)
    seqs = io_files.load_split(args.data, args.split)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for seq in seqs:
        _, cache = model.forward_video(seq.features, train=False)
        rows = []
        T = seq.T
        if model.cfg.kind == "avg":
            for t in range(1, T + 1):
                rows.append([0, t, f"{t / model.cfg.Z:.10g}", 1.0, f"{1.0 / T:.10g}", "", ""])
        else:
            acache = cache["attn"]
            e = acache["e"]
            a = acache["a"]
            mu = acache.get("mu")
            sigma = acache.get("sigma")
            K = e.shape[0]
            for k in range(K):
                for t in range(1, T + 1):
                    rows.append([
                        k, t, f"{t / model.cfg.Z:.10g}",
                        f"{a[k, t - 1]:.10g}", f"{e[k, t - 1]:.10g}",
                        "" if mu is None else f"{mu[k]:.10g}",
                        "" if sigma is None else f"{sigma[k]:.10g}"])
        io_files.write_csv(out / f"{seq.video_id}.csv",
                           ["k", "t", "t_over_Z", "a", "e", "mu_k", "sigma_k"],
                           rows, deterministic=args.deterministic_output)
    print(f"wrote {len(seqs)} attention traces to {out}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "gradcheck": _cmd_gradcheck,
    "ablate": _cmd_ablate,
    "dump-attention": _cmd_dump_attention,
}


def cli_dispatch(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(parser, args, argv)
        return _COMMANDS[args.command](args)
    except CltaError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
