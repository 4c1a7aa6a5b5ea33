"""Command-line interface.

Subcommands: ``eval`` (score a manifest into JSON/CSV/text reports and
optional figures), ``assign-regions`` (attention- or identity-based region
assignment), ``build-mask`` (base or isolation attention masks), ``sample``
(stratified id selection), ``assign-ids``, ``select-poses``, ``id-sim``, and
``rpc`` (line-delimited JSON request loop used by out-of-process bindings).

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import core, harness, maskiso, regions, sampler
from .core import ValidationError
from .metrics import hungarian_id_similarity


def _emit(obj: dict, out: str | None) -> None:
    if out:
        core.dump_json(obj, out)
    else:
        json.dump(obj, sys.stdout, indent=2)
        sys.stdout.write("\n")


def _cmd_eval(args) -> int:
    records = core.parse_manifest(args.manifest)
    scored, skipped = harness.evaluate_manifest(
        records, jobs=args.jobs, skip_invalid=args.skip_invalid
    )
    for sid, err in skipped:
        print(f"warning: skipped sample {sid}: {err}", file=sys.stderr)
    if not scored:
        raise ValidationError("no valid samples to evaluate")
    report = harness.aggregate_report(scored)
    _emit(harness.report_to_json(report), args.out)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as f:
            f.write(harness.report_to_csv(report))
    if args.text:
        print(harness.render_text_table(report))
    if args.figures:
        from . import figures  # defers the matplotlib import

        for path in figures.render_report_figures(report, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def _parse_sim_maps(doc: dict, base_dir: str) -> list[core.SimilarityMap]:
    maps = []
    for i, entry in enumerate(doc["sim_maps"]):
        d = entry.get("d")
        if not isinstance(d, int) or d < 0:
            raise ValidationError("sim map needs integer d", f"sim_maps[{i}]")
        if "file" in entry:
            import os

            raw = np.fromfile(os.path.join(base_dir, entry["file"]), dtype="<f4")
            if raw.size != d * d:
                raise ValidationError(
                    f"sim map file holds {raw.size} floats, expected {d}^2",
                    f"sim_maps[{i}]",
                )
            grid = raw.reshape(d, d).astype(np.float64)
        else:
            grid = np.asarray(entry.get("data", []), dtype=np.float64).reshape(d, d)
        maps.append(core.SimilarityMap(grid))
    return maps


def _cmd_assign_regions(args) -> int:
    import os

    seg_doc = core.load_json(args.segments)
    segments = [
        core.parse_region_map(obj, f"segments[{i}]")
        for i, obj in enumerate(seg_doc.get("segments", []))
    ]
    if args.mode == "attention":
        probe_doc = core.load_json(args.probe)
        if "sim_maps" in probe_doc:
            sim_maps = _parse_sim_maps(
                probe_doc, os.path.dirname(args.probe) or "."
            )
        else:
            probe = regions.load_attention_probe(args.probe)
            sim_maps = regions.aggregate_attention_maps(probe)
        assignment = regions.assign_regions_by_attention(
            sim_maps, segments, nms_applied=args.nms_applied, theta=args.theta
        )
    else:
        probe_doc = core.load_json(args.probe)
        if "ref_embeddings" not in probe_doc:
            raise ValidationError("identity mode needs ref_embeddings in probe file")
        refs = core.parse_embedding_set(
            probe_doc["ref_embeddings"], "reference",
            os.path.dirname(args.probe) or ".", "ref_embeddings",
        )
        if not args.nms_applied:
            segments = regions.nms_masks(segments, args.theta)
        faces = []
        if segments:
            emb_obj = seg_doc.get("embeddings")
            if emb_obj is None:
                raise ValidationError(
                    "identity mode needs embeddings in the segments file"
                )
            gens = core.parse_embedding_set(
                emb_obj, "generated",
                os.path.dirname(args.segments) or ".", "embeddings",
            )
            if len(gens) != len(segments):
                raise ValidationError(
                    f"{len(segments)} segments but {len(gens)} embeddings"
                )
            faces = [(seg, gens.vectors[q]) for q, seg in enumerate(segments)]
        shape = tuple(seg_doc["shape"]) if "shape" in seg_doc else None
        assignment = regions.assign_regions_by_identity(refs, faces, shape=shape)
    _emit(
        {
            "mode": args.mode,
            "fill_policy": assignment.fill_policy,
            "matched": [[k, q] for k, q in assignment.matched],
            "maps": [core.region_map_to_json(m) for m in assignment.maps],
        },
        args.out,
    )
    return 0


def _cmd_build_mask(args) -> int:
    layout = core.parse_token_layout(core.load_json(args.layout))
    if not args.rois:
        mask = maskiso.build_base_mask(layout)
    else:
        rois_doc = core.load_json(args.rois)
        entries = rois_doc.get("rois")
        if not isinstance(entries, list):
            raise ValidationError("rois file needs a rois array")
        rois = []
        for i, entry in enumerate(entries):
            if isinstance(entry, dict):
                rois.append(
                    maskiso.roi_from_region_map(
                        core.parse_region_map(entry, f"rois[{i}]"), layout
                    )
                )
            else:
                rois.append(tuple(int(x) for x in entry))
        mask = maskiso.build_isolated_mask(
            maskiso.IsolationSpec(layout=layout, rois=tuple(rois))
        )
    _emit(maskiso.mask_to_json(mask), args.out)
    return 0


def _cmd_sample(args) -> int:
    pool_doc = core.load_json(args.pool)
    pool = []
    for i, entry in enumerate(pool_doc.get("pool", [])):
        pid = entry.get("id")
        if not isinstance(pid, str):
            raise ValidationError("pool entry needs a string id", f"pool[{i}]")
        label = core.parse_attribute_label(
            entry.get("attributes", {}), f"pool[{i}].attributes"
        )
        pool.append((pid, label))
    targets = sampler.TargetDistribution(core.load_json(args.targets))
    selected = sampler.stratified_sample(
        pool, targets, args.n, args.seed, best_effort=args.best_effort
    )
    _emit(
        {
            "selected": selected,
            "n": args.n,
            "seed": args.seed,
            "rng": sampler.RNG_ALGORITHM,
        },
        args.out,
    )
    return 0


def _cmd_assign_ids(args) -> int:
    ids_doc = core.load_json(args.ids)
    prompts_doc = core.load_json(args.prompts)
    ids = ids_doc.get("ids")
    if not isinstance(ids, list):
        raise ValidationError("ids file needs an ids array")
    prompt_entries = prompts_doc.get("prompts")
    if not isinstance(prompt_entries, list):
        raise ValidationError("prompts file needs a prompts array")
    prompts = []
    persons = {}
    for i, entry in enumerate(prompt_entries):
        pid = entry.get("prompt_id")
        if not isinstance(pid, str):
            raise ValidationError("prompt entry needs prompt_id", f"prompts[{i}]")
        prompts.append(pid)
        persons[pid] = int(entry.get("persons", 0))
    assignments = sampler.assign_ids_to_prompts(
        ids, prompts, args.iterations, persons, args.seed
    )
    _emit(
        {
            "assignments": [
                {"prompt": p, "iteration": it, "ids": chosen}
                for p, it, chosen in assignments
            ],
            "seed": args.seed,
            "rng": sampler.RNG_ALGORITHM,
        },
        args.out,
    )
    return 0


def _cmd_select_poses(args) -> int:
    doc = core.load_json(args.candidates)
    per_prompt = {}
    for prompt, entries in doc.get("candidates", {}).items():
        cands = []
        for i, entry in enumerate(entries):
            cands.append(
                (
                    str(entry["image_id"]),
                    float(entry["action_score"]),
                    int(entry["count"]),
                )
            )
        per_prompt[prompt] = cands
    _emit({"selections": harness.select_pose_sources(per_prompt)}, args.out)
    return 0


def _id_sim_payload(refs: core.EmbeddingSet, gens: core.EmbeddingSet) -> dict:
    result = hungarian_id_similarity(refs, gens)
    return {
        "s_id": result.s_id,
        "matches": [[i, j, s] for i, j, s in result.matches],
        "unmatched_refs": list(result.unmatched_refs),
    }


def _cmd_id_sim(args) -> int:
    import os

    refs = core.parse_embedding_set(
        core.load_json(args.refs), "reference",
        os.path.dirname(args.refs) or ".", "refs",
    )
    gens = core.parse_embedding_set(
        core.load_json(args.gens), "generated",
        os.path.dirname(args.gens) or ".", "gens",
    )
    _emit(_id_sim_payload(refs, gens), args.out)
    return 0


def _rpc_dispatch(request: dict) -> dict:
    op = request.get("op")
    if op == "ping":
        return {"result": "pong"}
    if op == "id_sim":
        refs = core.parse_embedding_set(request["refs"], "reference", ".", "refs")
        gens = core.parse_embedding_set(request["gens"], "generated", ".", "gens")
        return {"result": _id_sim_payload(refs, gens)}
    if op == "assign_regions_attention":
        sim_maps = _parse_sim_maps({"sim_maps": request["sim_maps"]}, ".")
        segments = [
            core.parse_region_map(obj, f"segments[{i}]")
            for i, obj in enumerate(request.get("segments", []))
        ]
        assignment = regions.assign_regions_by_attention(
            sim_maps,
            segments,
            nms_applied=bool(request.get("nms_applied", True)),
            theta=float(request.get("theta", regions.DEFAULT_NMS_THETA)),
        )
        return {
            "result": {
                "fill_policy": assignment.fill_policy,
                "matched": [[k, q] for k, q in assignment.matched],
                "maps": [core.region_map_to_json(m) for m in assignment.maps],
            }
        }
    raise ValidationError(f"unknown rpc op {op!r}")


def _cmd_rpc(_args) -> int:
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            response = {"ok": True, **_rpc_dispatch(request)}
        except ValidationError as e:
            response = {"ok": False, "code": 1, "message": str(e)}
        except (KeyError, TypeError, ValueError) as e:
            response = {"ok": False, "code": 1, "message": f"bad request: {e}"}
        except OSError as e:
            response = {"ok": False, "code": 2, "message": str(e)}
        sys.stdout.write(json.dumps(response) + "\n")
        sys.stdout.flush()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mht", description="Multi-human generation evaluation toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="score a manifest and emit reports")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="report JSON path (stdout if omitted)")
    p.add_argument("--csv", help="also write a CSV report")
    p.add_argument("--text", action="store_true", help="print the text table")
    p.add_argument("--figures", help="directory for report figures")
    p.add_argument("--skip-invalid", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("assign-regions", help="implicit region assignment")
    p.add_argument("--probe", required=True)
    p.add_argument("--segments", required=True)
    p.add_argument("--mode", choices=("attention", "identity"), required=True)
    p.add_argument("--theta", type=float, default=regions.DEFAULT_NMS_THETA)
    p.add_argument(
        "--nms-applied",
        action="store_true",
        help="segments are already NMS-filtered; skip NMS here",
    )
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_assign_regions)

    p = sub.add_parser("build-mask", help="base or isolation attention mask")
    p.add_argument("--layout", required=True)
    p.add_argument("--rois", help="ROI file; omitted builds the base mask")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_build_mask)

    p = sub.add_parser("sample", help="stratified id selection")
    p.add_argument("--pool", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--best-effort", action="store_true")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_sample)

    p = sub.add_parser("assign-ids", help="assign ids to prompt iterations")
    p.add_argument("--ids", required=True)
    p.add_argument("--prompts", required=True)
    p.add_argument("--iterations", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_assign_ids)

    p = sub.add_parser("select-poses", help="filter pose-source candidates")
    p.add_argument("--candidates", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_select_poses)

    p = sub.add_parser("id-sim", help="identity similarity for two sets")
    p.add_argument("--refs", required=True)
    p.add_argument("--gens", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_id_sim)

    p = sub.add_parser("rpc", help="JSONL request loop on stdin/stdout")
    p.set_defaults(fn=_cmd_rpc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
