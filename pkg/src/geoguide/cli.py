"""Command-line interface.

Subcommands: ``flow`` (geodesic between two embedding batches), ``invert``
(text-guided morphing run), ``score`` (metric tables), ``bench`` (kernel
timing table), ``dimstudy`` (sweep of the subspace dimension). Commands emit
CSV/EMB1/PPM artifacts only; plotting is left to external tools.

Options may come from the command line or from a flat ``key=value`` file
passed via ``--config`` (flag > file > default). Every run directory or CSV
echoes the fully resolved configuration.

Exit codes: 0 success, 1 computation error, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from .encoders import make_encoder, synthetic_image
from .errors import (
    BadMagicError,
    CsvParseError,
    GeoguideError,
    RaggedRowsError,
    TruncatedPayloadError,
)
from .formats import read_emb1, read_image, read_kv, write_csv, write_emb1, write_kv
from .geodesic import (
    evaluate_flow,
    geodesic_flow,
    match_dims,
    metric_between,
    q_matrix,
)
from .inversion import (
    InversionConfig,
    derive_seed,
    make_setup,
    run_inversion,
    save_trajectory,
)
from .linalg import extract_subspace
from .metrics import (
    ScoreTable,
    d_metric,
    modality_gap,
    modulated_alignment,
    morphing_score,
    psnr,
    ssim,
    trail_stability,
)

_IO_ERRORS = (
    OSError,
    BadMagicError,
    TruncatedPayloadError,
    RaggedRowsError,
    CsvParseError,
)


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


# --------------------------------------------------------------------- flow


def cmd_flow(args) -> int:
    feats_a = read_emb1(args.src)
    feats_b = read_emb1(args.dst)
    ambient = feats_a.shape[1]
    requested = args.subspace_dim
    clamped = min(requested, ambient)
    p_a = extract_subspace(feats_a, clamped)
    p_b = extract_subspace(feats_b, clamped)
    p_a, p_b = match_dims(p_a, p_b)

    os.makedirs(args.out, exist_ok=True)
    nus = _parse_float_list(args.nu)
    if p_a.sub_dim == ambient:
        angles = np.zeros(ambient)
        metric = metric_between(p_a, p_b)
        for nu in nus:
            write_emb1(os.path.join(args.out, f"pi_{nu:.4f}.emb"), np.eye(ambient))
        quad_residual = 0.0
    else:
        flow = geodesic_flow(p_a, p_b)
        angles = flow.angles
        metric = q_matrix(flow)
        for nu in nus:
            basis = evaluate_flow(flow, nu).basis
            write_emb1(os.path.join(args.out, f"pi_{nu:.4f}.emb"), basis)
        quad_residual = _quadrature_residual(flow, metric, args.quad_nodes)

    write_csv(os.path.join(args.out, "angles.csv"), angles[None, :])
    write_emb1(os.path.join(args.out, "q.emb"), metric.q)
    write_csv(
        os.path.join(args.out, "diagnostics.csv"),
        np.array([[metric.eigen_floor, quad_residual, float(p_a.sub_dim)]]),
        comments={"columns": "min_eigenvalue,quadrature_residual,effective_dim"},
    )
    write_kv(
        os.path.join(args.out, "config.kv"),
        {
            "src": args.src,
            "dst": args.dst,
            "subspace_dim_requested": requested,
            "subspace_dim_effective": p_a.sub_dim,
            "nu": args.nu,
            "quad_nodes": args.quad_nodes,
        },
    )
    print(
        f"flow: k={p_a.sub_dim} angles_max={angles.max() if angles.size else 0.0:.6f} "
        f"min_eig={metric.eigen_floor:.3e} quad_residual={quad_residual:.3e}"
    )
    return 0


def _quadrature_residual(flow, metric, nodes: int) -> float:
    nus = np.linspace(0.0, 1.0, nodes + 1)
    weights = np.full(nodes + 1, 1.0 / nodes)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    acc = np.zeros_like(metric.q)
    for nu, w in zip(nus, weights):
        basis = evaluate_flow(flow, float(nu)).basis
        acc += w * (basis @ basis.T)
    return float(np.linalg.norm(acc - metric.q))


# ------------------------------------------------------------------- invert


_INVERT_KEYS = {
    "loss": str,
    "epochs": int,
    "lr": float,
    "ensembles": int,
    "subspace_dim": int,
    "lambda1": float,
    "lambda2": float,
    "schedule": str,
    "seed": int,
    "sample_every": int,
    "optimizer": str,
    "feature_dim": int,
    "text_dim": int,
    "max_grad_norm": float,
}

_INVERT_DEFAULTS = {
    "loss": "geodesic-total",
    "epochs": 800,
    "lr": 2e-4,
    "ensembles": 16,
    "subspace_dim": 256,
    "lambda1": 1.0,
    "lambda2": 0.3,
    "schedule": "cosine",
    "seed": 0,
    "sample_every": 50,
    "optimizer": "adam",
    "feature_dim": 32,
    "text_dim": 64,
    "max_grad_norm": 5.0,
}


def _resolve_invert_options(args) -> dict:
    """Merge flag > config-file > default for the invert-style options."""
    from_file: dict = {}
    if args.config:
        raw = read_kv(args.config)
        for key, caster in _INVERT_KEYS.items():
            if key in raw:
                from_file[key] = caster(raw[key])
    resolved = {}
    for key, default in _INVERT_DEFAULTS.items():
        flag_value = getattr(args, key.replace("-", "_"), None)
        if flag_value is not None:
            resolved[key] = flag_value
        elif key in from_file:
            resolved[key] = from_file[key]
        else:
            resolved[key] = default
    return resolved


def _invert_config(options: dict) -> InversionConfig:
    return InversionConfig(
        epochs=options["epochs"],
        learning_rate=options["lr"],
        ensembles=options["ensembles"],
        subspace_dim=options["subspace_dim"],
        loss_mode=options["loss"].replace("-", "_"),
        lambda1=options["lambda1"],
        lambda2=options["lambda2"],
        seed=options["seed"],
        schedule=options["schedule"],
        sample_every=options["sample_every"],
        optimizer=options["optimizer"],
        feature_dim=options["feature_dim"],
        text_dim=options["text_dim"],
        max_grad_norm=options["max_grad_norm"],
    )


def cmd_invert(args) -> int:
    options = _resolve_invert_options(args)
    cfg = _invert_config(options)
    source = read_image(args.source)
    traj = run_inversion(cfg, source, (args.src_prompt, args.trg_prompt))
    save_trajectory(args.out, traj)
    final = traj.final_state.loss_history[-1]
    print(
        f"final: total={final.total!r} inter={final.inter_term!r} "
        f"intra={final.intra_term!r} perceptual={final.perceptual_term!r} "
        f"lambda1={final.lambda1!r} lambda2={final.lambda2!r}"
    )
    return 0


# -------------------------------------------------------------------- score


def cmd_score(args) -> int:
    table = ScoreTable(kind=args.mode)
    comments = {"mode": args.mode, "a": args.a, "b": args.b}
    if args.mode == "morph":
        a = read_emb1(args.a)
        b = read_emb1(args.b)
        values = [morphing_score(x, y) for x, y in zip(a, b)]
        table.add("morph", values)
    elif args.mode == "psnr":
        table.add("psnr", [psnr(read_image(args.a), read_image(args.b))])
    elif args.mode == "ssim":
        table.add("ssim", [ssim(read_image(args.a), read_image(args.b))])
    elif args.mode == "dm":
        a = read_emb1(args.a)
        b = read_emb1(args.b)
        k = min(args.subspace_dim, a.shape[1])
        p_a, p_b = match_dims(extract_subspace(a, k), extract_subspace(b, k))
        metric = metric_between(p_a, p_b)
        values = [d_metric(metric, x, y) for x, y in zip(a, b)]
        table.add("dm", values)
        comments["effective_dim"] = p_a.sub_dim
    elif args.mode == "gap":
        img = read_emb1(args.a)
        txt = read_emb1(args.b)
        report = modality_gap(img, txt)
        table.add("gap_norm", [report.gap_norm])
        z_img = img.mean(axis=0)
        z_txt = txt.mean(axis=0)
        for coeff in _parse_float_list(args.coeffs):
            table.add(
                f"align_c={coeff:g}",
                [modulated_alignment(report, z_img, z_txt, coeff=coeff)],
            )
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown mode {args.mode}")
    table.write(args.out, comments=comments)
    print(f"score: wrote {len(table.rows)} row(s) to {args.out}")
    return 0


# -------------------------------------------------------------------- bench


def cmd_bench(args) -> int:
    dims = _parse_int_list(args.dims)
    batches = _parse_int_list(args.batches)
    rng = np.random.default_rng(args.seed)
    results = []  # (n, d, op, median_ms)
    for n in batches:
        for d in dims:
            k = max(1, min(n, d) // 2)
            times: dict[str, list[float]] = {"extract_subspace": [], "geodesic_flow": [], "q_matrix": []}
            for _ in range(args.trials):
                feats_a = rng.standard_normal((n, d))
                feats_b = rng.standard_normal((n, d))
                t0 = time.perf_counter()
                p_a = extract_subspace(feats_a, k)
                t1 = time.perf_counter()
                p_b = extract_subspace(feats_b, k)
                p_a, p_b = match_dims(p_a, p_b)
                flow = geodesic_flow(p_a, p_b)
                t2 = time.perf_counter()
                q_matrix(flow)
                t3 = time.perf_counter()
                times["extract_subspace"].append((t1 - t0) * 1e3)
                times["geodesic_flow"].append((t2 - t1) * 1e3)
                times["q_matrix"].append((t3 - t2) * 1e3)
            for op, vals in times.items():
                results.append((n, d, op, float(np.median(vals))))

    # Informational log-log slope of median time vs d, per (op, n) group.
    slopes: dict[tuple[str, int], float] = {}
    for n in batches:
        for op in ("extract_subspace", "geodesic_flow", "q_matrix"):
            pts = [(d, t) for (bn, d, bop, t) in results if bn == n and bop == op]
            if len(pts) >= 2:
                xs = np.log([p[0] for p in pts])
                ys = np.log([max(p[1], 1e-6) for p in pts])
                slopes[(op, n)] = float(np.polyfit(xs, ys, 1)[0])
            else:
                slopes[(op, n)] = float("nan")

    with open(args.out, "w", encoding="ascii") as fh:
        fh.write(f"# dims={args.dims}\n# batches={args.batches}\n# trials={args.trials}\n")
        fh.write("n,d,op,median_ms,slope_hint\n")
        for n, d, op, ms in results:
            fh.write(f"{n},{d},{op},{ms!r},{slopes[(op, n)]!r}\n")
    print(f"bench: wrote {len(results)} rows to {args.out}")
    return 0


# ----------------------------------------------------------------- dimstudy


def cmd_dimstudy(args) -> int:
    dims = _parse_int_list(args.dims)
    options = _resolve_invert_options(args)
    os.makedirs(args.out, exist_ok=True)

    base_cfg = _invert_config(options)
    if args.source:
        source_images = {s: read_image(args.source) for s in range(args.seeds)}
    else:
        source_images = {
            s: synthetic_image(16, 16, 3, seed=100 + s) for s in range(args.seeds)
        }

    rows = []
    for dim in dims:
        clamped = min(dim, base_cfg.feature_dim)
        warning = "" if clamped == dim else f"clamped_to_{clamped}"
        finals, morphs, stabilities, effectives = [], [], [], []
        for s in range(args.seeds):
            cfg = InversionConfig(**{**base_cfg.as_kv(), "subspace_dim": clamped, "seed": s})
            img = source_images[s]
            traj = run_inversion(cfg, img, (args.src_prompt, args.trg_prompt))
            setup = make_setup(cfg, img, (args.src_prompt, args.trg_prompt))
            final_image = traj.final_state.image
            finals.append(traj.final_state.loss_history[-1].total)
            morphs.append(
                morphing_score(
                    setup.source_feature,
                    setup.image_encoder.encode(final_image.reshape(-1)),
                )
            )
            enc_eval = make_encoder(
                "image", img.size, cfg.feature_dim, derive_seed(args.eval_seed, "eval-encoder")
            )
            frames = np.stack(
                [enc_eval.encode(st.image.reshape(-1)) for st in traj.states]
            )
            stabilities.append(trail_stability(frames))
            effectives.append(
                traj.provenance.get("effective_subspace_dim_intra", clamped)
            )
        rows.append(
            (
                dim,
                int(np.max(effectives)),
                float(np.median(finals)),
                float(np.median(morphs)),
                float(np.median(stabilities)),
                warning,
            )
        )

    out_csv = os.path.join(args.out, "dimstudy.csv")
    with open(out_csv, "w", encoding="ascii") as fh:
        fh.write(f"# config_hash={base_cfg.config_hash()}\n# seeds={args.seeds}\n")
        fh.write("dim_requested,dim_effective,final_total,morphing_score,stability,warning\n")
        for dim, eff, fin, morph, stab, warning in rows:
            fh.write(f"{dim},{eff},{fin!r},{morph!r},{stab!r},{warning}\n")
    write_kv(
        os.path.join(args.out, "config.kv"),
        {**{str(k): v for k, v in base_cfg.as_kv().items()},
         "dims": args.dims, "seeds": args.seeds, "config_hash": base_cfg.config_hash()},
    )
    print(f"dimstudy: wrote {len(rows)} rows to {out_csv}")
    return 0


# --------------------------------------------------------------------- main


def _add_invert_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--src-prompt", required=True)
    parser.add_argument("--trg-prompt", required=True)
    parser.add_argument("--loss", choices=["directional", "spherical", "geodesic-total"])
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--ensembles", type=int)
    parser.add_argument("--subspace-dim", type=int, dest="subspace_dim")
    parser.add_argument("--lambda1", type=float)
    parser.add_argument("--lambda2", type=float)
    parser.add_argument("--schedule", choices=["constant", "cosine"])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--sample-every", type=int, dest="sample_every")
    parser.add_argument("--optimizer", choices=["gd", "adam"])
    parser.add_argument("--feature-dim", type=int, dest="feature_dim")
    parser.add_argument("--text-dim", type=int, dest="text_dim")
    parser.add_argument("--max-grad-norm", type=float, dest="max_grad_norm")
    parser.add_argument("--config", help="key=value file; flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geoguide",
        description="Geodesic-guided embedding morphing toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_flow = sub.add_parser("flow", help="geodesic flow and metric between two batches")
    p_flow.add_argument("--src", required=True)
    p_flow.add_argument("--dst", required=True)
    p_flow.add_argument("--subspace-dim", type=int, required=True, dest="subspace_dim")
    p_flow.add_argument("--nu", default="0,0.5,1")
    p_flow.add_argument("--quad-nodes", type=int, default=2048, dest="quad_nodes")
    p_flow.add_argument("--out", required=True)
    p_flow.set_defaults(func=cmd_flow)

    p_inv = sub.add_parser("invert", help="run a text-guided morphing loop")
    p_inv.add_argument("--source", required=True)
    _add_invert_options(p_inv)
    p_inv.add_argument("--out", required=True)
    p_inv.set_defaults(func=cmd_invert)

    p_score = sub.add_parser("score", help="evaluate metric tables")
    p_score.add_argument("--mode", required=True, choices=["morph", "psnr", "ssim", "dm", "gap"])
    p_score.add_argument("--a", required=True)
    p_score.add_argument("--b", required=True)
    p_score.add_argument("--subspace-dim", type=int, default=8, dest="subspace_dim")
    p_score.add_argument("--coeffs", default="0,0.5,1")
    p_score.add_argument("--out", required=True)
    p_score.set_defaults(func=cmd_score)

    p_bench = sub.add_parser("bench", help="time the subspace/flow/metric kernels")
    p_bench.add_argument("--dims", required=True)
    p_bench.add_argument("--batches", required=True)
    p_bench.add_argument("--trials", type=int, default=5)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", required=True)
    p_bench.set_defaults(func=cmd_bench)

    p_dim = sub.add_parser("dimstudy", help="sweep the subspace dimension")
    p_dim.add_argument("--dims", required=True)
    p_dim.add_argument("--seeds", type=int, default=3)
    p_dim.add_argument("--source", help="source image; synthetic images when omitted")
    p_dim.add_argument("--eval-seed", type=int, default=12345, dest="eval_seed")
    _add_invert_options(p_dim)
    p_dim.add_argument("--out", required=True)
    p_dim.set_defaults(func=cmd_dimstudy)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (GeoguideError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:  # console-script target
    sys.exit(main())
