"""Command-line surface: tokenize, detokenize, roundtrip, stats, sample,
metrics, pack, curate, pairs, dpo.

Stats go to stdout, diagnostics to stderr, machine-readable formats to files.
Exit code is 0 exactly when no per-item failure occurred. All randomness sits
behind explicit --seed flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import stream
from .curation import (
    CurationConfig,
    DpoBatch,
    PairCandidate,
    ScoreTable,
    build_pair_manifest,
    dpo_loss,
    dpo_loss_grad,
    merge_annotations,
    read_pair_manifest,
    run_filter_cascade,
    write_pair_manifest,
)
from .errors import MeshTokError
from .mesh import Mesh, dequantize, normalize, quantize, sample_surface
from .meshio import load_mesh_path, save_obj
from .metrics import evaluate_pair, format_report_line
from .packing import (
    WindowSpec,
    bucket_sequences,
    split_windows,
    write_batch_manifest,
)
from .tokenizer import (
    TokenClass,
    TokenSequence,
    VocabSpec,
    compression_ratio,
    decode,
    encode,
    vocab_size,
)


def _vocab_spec(args) -> VocabSpec:
    try:
        a, b, c = (int(v) for v in args.blocks.split(","))
    except ValueError:
        raise MeshTokError(f"--blocks expects 'A,B,C', got {args.blocks!r}") from None
    spec = VocabSpec(a, b, c)
    if args.resolution is not None and args.resolution != spec.resolution:
        raise MeshTokError(
            f"--resolution {args.resolution} inconsistent with blocks "
            f"{a}*{b}*{c} = {spec.resolution}"
        )
    return spec


def _prepare(mesh: Mesh, spec: VocabSpec):
    """Quantize, normalizing first unless the mesh already sits in the unit
    cube (keeps tokenize idempotent across a detokenize round trip)."""
    if mesh.vertex_count and (mesh.vertices.min() < 0.0 or mesh.vertices.max() > 1.0):
        mesh, _ = normalize(mesh)
    return quantize(mesh, spec.resolution)


def _map_jobs(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _out_path(path: Path, out_dir: str | None, suffix: str) -> Path:
    target = path.with_suffix(suffix)
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        target = Path(out_dir) / target.name
    return target


def _canonical_faces(qmesh) -> list:
    verts = qmesh.vertices
    out = []
    for f in qmesh.faces.tolist():
        tri = [tuple(verts[i]) for i in f]
        s = min(range(3), key=lambda t: tri[t])
        out.append((tri[s], tri[(s + 1) % 3], tri[(s + 2) % 3]))
    return sorted(out)


def _read_ids(path: Path):
    if path.suffix.lower() in (".txt", ".ids"):
        return stream.read_ids_text(path), None
    ids, header = stream.read_dmtk(path)
    return ids, header


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_tokenize(args) -> int:
    spec = _vocab_spec(args)
    failures = 0

    def work(path: Path):
        mesh = load_mesh_path(path)
        qmesh = _prepare(mesh, spec)
        seq = encode(qmesh, spec)
        target = _out_path(path, args.out_dir, ".dmtk")
        stream.write_dmtk(target, seq, spec)
        patches = sum(1 for t in seq.tokens if t.token_class is TokenClass.CENTER_I)
        ratio = compression_ratio(seq) if seq.face_count else float("nan")
        return f"{path} faces={seq.face_count} tokens={len(seq)} ratio={ratio:.4f} patches={patches}"

    paths = [Path(p) for p in args.files]
    if not paths:
        print("warning: no input files", file=sys.stderr)
        return 0
    for path, result in zip(paths, _map_jobs(_guard(work), paths, args.jobs)):
        if isinstance(result, Exception):
            failures += 1
            print(f"error: {path}: {result}", file=sys.stderr)
        else:
            print(result)
    return 1 if failures else 0


def cmd_detokenize(args) -> int:
    failures = 0
    for raw in args.files:
        path = Path(raw)
        try:
            ids, header = _read_ids(path)
            spec = header.spec if header is not None else _vocab_spec(args)
            qmesh = decode(ids, spec)
            # Plain .obj only under --out-dir; otherwise avoid clobbering a
            # sibling mesh the stream was tokenized from.
            suffix = ".obj" if args.out_dir else ".decoded.obj"
            target = _out_path(path, args.out_dir, suffix)
            save_obj(dequantize(qmesh), target)
            print(f"{path} vertices={qmesh.vertex_count} faces={qmesh.face_count} -> {target}")
        except MeshTokError as exc:
            failures += 1
            print(f"error: {path}: {exc}", file=sys.stderr)
    return 1 if failures else 0


def cmd_roundtrip(args) -> int:
    spec = _vocab_spec(args)
    failures = 0

    def work(path: Path):
        qmesh = _prepare(load_mesh_path(path), spec)
        back = decode(encode(qmesh, spec), spec)
        return _canonical_faces(back) == _canonical_faces(qmesh)

    paths = [Path(p) for p in args.files]
    results = _map_jobs(_guard(work), paths, args.jobs)
    passed = 0
    for path, result in zip(paths, results):
        if isinstance(result, Exception):
            failures += 1
            print(f"error: {path}: {result}", file=sys.stderr)
        elif result:
            passed += 1
            print(f"{path} PASS")
        else:
            failures += 1
            print(f"{path} FAIL")
    print(f"roundtrip {passed}/{len(paths)} passed")
    return 1 if failures else 0


def cmd_stats(args) -> int:
    failures = 0
    for raw in args.files:
        path = Path(raw)
        try:
            ids, header = _read_ids(path)
            if header is not None:
                ratio = (
                    len(ids) / (9.0 * header.face_count)
                    if header.face_count
                    else float("nan")
                )
                print(
                    f"{path} tokens={len(ids)} faces={header.face_count} "
                    f"ratio={ratio:.4f} resolution={header.spec.resolution} "
                    f"blocks={header.spec.a},{header.spec.b},{header.spec.c} "
                    f"vocab={vocab_size(header.spec)}"
                )
            else:
                print(f"{path} tokens={len(ids)}")
        except MeshTokError as exc:
            failures += 1
            print(f"error: {path}: {exc}", file=sys.stderr)
    return 1 if failures else 0


def cmd_sample(args) -> int:
    failures = 0
    for raw in args.files:
        path = Path(raw)
        try:
            mesh = load_mesh_path(path)
            points = sample_surface(mesh, args.dense, args.select, args.seed)
            target = _out_path(path, args.out_dir, ".xyz")
            with open(target, "w") as fh:
                for x, y, z in points.points.tolist():
                    fh.write(f"{x!r} {y!r} {z!r}\n")
            print(f"{path} sampled={len(points)} seed={args.seed} -> {target}")
        except MeshTokError as exc:
            failures += 1
            print(f"error: {path}: {exc}", file=sys.stderr)
    return 1 if failures else 0


def cmd_metrics(args) -> int:
    if len(args.files) % 2:
        print("error: metrics expects an even number of files", file=sys.stderr)
        return 1
    failures = 0
    for a, b in zip(args.files[::2], args.files[1::2]):
        try:
            report = evaluate_pair(
                load_mesh_path(a), load_mesh_path(b), n=args.n, seed=args.seed
            )
            print(format_report_line(f"{a}:{b}", report))
        except MeshTokError as exc:
            failures += 1
            print(f"error: {a}:{b}: {exc}", file=sys.stderr)
    return 1 if failures else 0


def cmd_pack(args) -> int:
    spec = _vocab_spec(args)
    wspec = WindowSpec(
        window_length=args.window,
        stride=args.stride,
        pad_id=args.pad_id if args.pad_id is not None else vocab_size(spec),
    )
    failures = 0
    lengths: list[tuple[str, int]] = []
    for raw in args.files:
        path = Path(raw)
        try:
            ids, header = _read_ids(path)
            source_id = path.stem
            lengths.append((source_id, len(ids)))
            windows = split_windows(ids, wspec, source_id)
            sidecar = []
            for n, win in enumerate(windows):
                target = _out_path(path, args.out_dir, f".w{n}.dmtk")
                wspec_vocab = header.spec if header is not None else spec
                stream.write_dmtk(target, win.ids, wspec_vocab, face_count=0)
                sidecar.append(
                    {
                        "window": n,
                        "file": target.name,
                        "source": win.source_id,
                        "offset": win.offset,
                        "valid_length": win.valid_length,
                    }
                )
            meta = _out_path(path, args.out_dir, ".windows.json")
            meta.write_text(json.dumps(sidecar, indent=2) + "\n")
            print(f"{path} tokens={len(ids)} windows={len(windows)} window={wspec.window_length} stride={wspec.stride}")
        except MeshTokError as exc:
            failures += 1
            print(f"error: {path}: {exc}", file=sys.stderr)
    if args.batch_size and lengths:
        plan = bucket_sequences(lengths, args.batch_size, args.seed)
        manifest = Path(args.out_dir or ".") / "batches.txt"
        write_batch_manifest(plan, manifest)
        print(f"batch plan: {len(plan.batches)} batches -> {manifest}")
    return 1 if failures else 0


def cmd_curate(args) -> int:
    cfg_kwargs = {}
    if args.config:
        cfg_kwargs.update(json.loads(Path(args.config).read_text()))
    if args.area_min is not None:
        cfg_kwargs["area_min"] = args.area_min
    if args.loss_threshold is not None:
        cfg_kwargs["loss_threshold"] = args.loss_threshold
    if args.keep_fraction is not None:
        cfg_kwargs["aesthetic_keep_fraction"] = args.keep_fraction
    try:
        cfg = CurationConfig(**cfg_kwargs)
        losses = ScoreTable.load(args.losses, "loss")
        aesthetics = ScoreTable.load(args.aesthetics, "aesthetic")
        meshes = [(Path(p).stem, load_mesh_path(p)) for p in args.files]
        kept, dropped = run_filter_cascade(meshes, losses, aesthetics, cfg)
    except MeshTokError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for sid in kept:
        print(f"{sid} kept")
    for sid, reason in dropped:
        print(f"{sid} dropped {reason}")
    return 0


def cmd_pairs(args) -> int:
    try:
        if args.merge:
            rows = read_pair_manifest(args.candidates)
            annotated = read_pair_manifest(args.merge)
            merged = merge_annotations(rows, annotated)
            write_pair_manifest(merged, args.out)
            unresolved = sum(1 for r in merged if not r.resolved)
            print(f"merged {len(merged)} rows, {unresolved} unresolved -> {args.out}")
            return 1 if unresolved else 0
        cfg = CurationConfig(
            face_min=args.face_min, cd_threshold=args.cd_threshold
        )
        candidates = _read_candidates(Path(args.candidates))
        rows = build_pair_manifest(candidates, cfg)
        write_pair_manifest(rows, args.out)
        by_outcome: dict[str, int] = {}
        for row in rows:
            by_outcome[row.outcome.value] = by_outcome.get(row.outcome.value, 0) + 1
        summary = " ".join(f"{k}={v}" for k, v in sorted(by_outcome.items()))
        print(f"pairs: {len(rows)} rows ({summary or 'none'}) -> {args.out}")
        return 0
    except MeshTokError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _read_candidates(path: Path) -> list[PairCandidate]:
    candidates = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip() or (lineno == 1 and line.startswith("condition_id")):
            continue
        parts = line.split("\t")
        if len(parts) != 7:
            raise MeshTokError(
                f"{path}: line {lineno}: expected 7 columns "
                "(condition_id A B cd_A cd_B faces_A faces_B)"
            )
        cond, a, b, cd_a, cd_b, fa, fb = parts
        candidates.append(
            PairCandidate(cond, a, b, float(cd_a), float(cd_b), int(fa), int(fb))
        )
    return candidates


def cmd_dpo(args) -> int:
    try:
        rows = []
        for lineno, line in enumerate(Path(args.batch).read_text().splitlines(), 1):
            if not line.strip() or line.startswith("policy_preferred"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise MeshTokError(
                    f"line {lineno}: expected 4 columns (policy_preferred "
                    "reference_preferred policy_dispreferred reference_dispreferred)"
                )
            rows.append([float(v) for v in parts])
        data = np.asarray(rows, dtype=np.float64).reshape(-1, 4)
        batch = DpoBatch(
            policy_preferred=data[:, 0],
            reference_preferred=data[:, 1],
            policy_dispreferred=data[:, 2],
            reference_dispreferred=data[:, 3],
            beta=args.beta,
        )
        print(f"{dpo_loss(batch):.6f}")
        if args.grad:
            grads = dpo_loss_grad(batch)
            for n in range(len(batch)):
                print(
                    f"pair {n} d_policy_preferred={grads.policy_preferred[n]:.6g} "
                    f"d_policy_dispreferred={grads.policy_dispreferred[n]:.6g} "
                    f"d_reference_preferred={grads.reference_preferred[n]:.6g} "
                    f"d_reference_dispreferred={grads.reference_dispreferred[n]:.6g}"
                )
        return 0
    except MeshTokError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _guard(fn):
    def wrapped(item):
        try:
            return fn(item)
        except (MeshTokError, OSError) as exc:
            return exc

    return wrapped


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshtok",
        description="Lossless mesh tokenization codec and data-pipeline tools.",
    )
    parser.add_argument("--resolution", type=int, default=None,
                        help="grid resolution; must equal A*B*C")
    parser.add_argument("--blocks", default="4,8,16",
                        help="block side lengths A,B,C (default 4,8,16)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tokenize", help="meshes -> DMTK token streams")
    p.add_argument("files", nargs="*")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(fn=cmd_tokenize)

    p = sub.add_parser("detokenize", help="DMTK token streams -> OBJ meshes")
    p.add_argument("files", nargs="+")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(fn=cmd_detokenize)

    p = sub.add_parser("roundtrip", help="verify encode/decode losslessness")
    p.add_argument("files", nargs="+")
    p.set_defaults(fn=cmd_roundtrip)

    p = sub.add_parser("stats", help="report token stream headers")
    p.add_argument("files", nargs="+")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("sample", help="area-weighted surface point samples")
    p.add_argument("files", nargs="+")
    p.add_argument("--dense", type=int, default=20000)
    p.add_argument("--select", type=int, default=16384)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("metrics", help="chamfer/hausdorff between mesh pairs")
    p.add_argument("files", nargs="+")
    p.add_argument("--n", type=int, default=1024)
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("pack", help="split token streams into context windows")
    p.add_argument("files", nargs="+")
    p.add_argument("--window", type=int, default=9000)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--pad-id", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(fn=cmd_pack)

    p = sub.add_parser("curate", help="run the training-data filter cascade")
    p.add_argument("files", nargs="+")
    p.add_argument("--losses", required=True)
    p.add_argument("--aesthetics", required=True)
    p.add_argument("--config", default=None, help="JSON file of CurationConfig fields")
    p.add_argument("--area-min", type=float, default=None)
    p.add_argument("--loss-threshold", type=float, default=None)
    p.add_argument("--keep-fraction", type=float, default=None)
    p.set_defaults(fn=cmd_curate)

    p = sub.add_parser("pairs", help="gate preference-pair candidates")
    p.add_argument("candidates")
    p.add_argument("--out", required=True)
    p.add_argument("--cd-threshold", type=float, default=None)
    p.add_argument("--face-min", type=int, default=5000)
    p.add_argument("--merge", default=None,
                   help="annotated manifest to merge into the candidates manifest")
    p.set_defaults(fn=cmd_pairs)

    p = sub.add_parser("dpo", help="preference-optimization loss over a batch file")
    p.add_argument("batch")
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--grad", action="store_true")
    p.set_defaults(fn=cmd_dpo)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except MeshTokError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
