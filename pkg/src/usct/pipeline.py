"""Staged experiment orchestration.

Each stage reads its inputs from the run directory and writes artifacts that
later stages (or a re-run) can load without recomputing anything:

    phantoms   -> phantoms.apst, phantoms.json
    simulate   -> cubes_dense.apst, cubes_sparse.apst, acquisition.json
    train-wave -> upscaler.apst, upscaler.json
    upscale    -> upscaled.apst
    train-fwi  -> fwi.apst, fwi.json
    evaluate   -> reconstructions.apst, report.json, report.csv
    tables     -> cost_table.csv

`run_pipeline` chains them all. Outputs contain no timestamps, so a repeated
run with the same config and seed is byte-identical. A stage failure aborts
with the stage name; status.json records completed stages and any failure.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .container import read_tensors, write_tensors
from .errors import DataError, UsctError
from .geometry import element_count, subsample_indices
from .inversion import (FwiModel, SourceEncodingSpec, InversionNetSpec,
                        build_fwi, reconstruct, train_fwi)
from .metrics import (DEFAULT_THRESHOLDS, MetricReport, compute_report,
                      cosine_similarity, nearest_interp)
from .nn import ParamStore
from .phantoms import SosMap, dataset_class, generate_dataset
from .upscaler import (UpscalerModel, build_upscaler, interleave_zeros,
                       plan_upscaler, train_upscaler, upscale)
from .wavesim import WaveformCube, simulate_acquisition

STAGES = ("phantoms", "simulate", "train-wave", "upscale", "train-fwi",
          "evaluate")


# ---------------------------------------------------------------------------
# checkpoint helpers

def store_sections(store: ParamStore) -> dict[str, np.ndarray]:
    """Named sections: value plus both Adam moments per parameter."""
    sec: dict[str, np.ndarray] = {}
    for p in store:
        sec[f"param/{p.name}/value"] = p.value
        sec[f"param/{p.name}/m"] = p.m
        sec[f"param/{p.name}/v"] = p.v
    sec["step_count"] = np.array([store.step_count], dtype=np.float64)
    return sec


def load_store(store: ParamStore, sections: dict[str, np.ndarray]) -> None:
    """Copy checkpoint sections into an already-built store, name by name."""
    for p in store:
        for part, target in (("value", p.value), ("m", p.m), ("v", p.v)):
            key = f"param/{p.name}/{part}"
            if key not in sections:
                raise DataError(f"checkpoint missing section {key!r}")
            src = sections[key]
            if src.shape != target.shape:
                raise DataError(
                    f"checkpoint section {key!r} has shape {src.shape}, "
                    f"expected {target.shape}")
            target[...] = src.astype(target.dtype)
    store.step_count = int(sections["step_count"][0])


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# stages

def stage_phantoms(cfg: ExperimentConfig, out: Path) -> None:
    spec = cfg.phantom_spec()
    maps = generate_dataset(spec, cfg.phantom_count, seed=spec.seed)
    write_tensors(out / "phantoms.apst",
                  {f"phantom_{i:04d}": m.values for i, m in enumerate(maps)})
    _write_json(out / "phantoms.json", {
        "count": cfg.phantom_count,
        "seed": spec.seed,
        "dx": cfg.dx,
        "class_labels": [dataset_class(i) for i in range(cfg.phantom_count)],
        "spec": {k: v for k, v in asdict(spec).items()},
    })


def load_phantoms(cfg: ExperimentConfig, out: Path) -> list[SosMap]:
    sections = read_tensors(out / "phantoms.apst")
    return [SosMap(values=sections[f"phantom_{i:04d}"], dx=cfg.dx)
            for i in range(cfg.phantom_count)]


def stage_simulate(cfg: ExperimentConfig, out: Path) -> None:
    """Dense cubes by simulation; sparse cubes by subsample restriction.

    The restriction equals an independent sparse simulation bit-exactly
    (tested property), so simulating once is purely an optimization.
    """
    maps = load_phantoms(cfg, out)
    grid, wav = cfg.sim_grid(), cfg.wavelet()
    dense_cfg = cfg.acquisition("dense")
    si = subsample_indices(cfg.dense_sources, cfg.sparse_sources)
    ri = subsample_indices(cfg.dense_receivers, cfg.sparse_receivers)
    dense, sparse = {}, {}
    for i, m in enumerate(maps):
        cube = simulate_acquisition(m, dense_cfg, grid, wav,
                                    workers=cfg.workers)
        vals = cube.values.astype(np.float32)
        dense[f"cube_{i:04d}"] = vals
        sparse[f"cube_{i:04d}"] = np.ascontiguousarray(vals[np.ix_(si, ri)])
    write_tensors(out / "cubes_dense.apst", dense)
    write_tensors(out / "cubes_sparse.apst", sparse)
    _write_json(out / "acquisition.json", {
        "dense": {"n_sources": cfg.dense_sources,
                  "n_receivers": cfg.dense_receivers},
        "sparse": {"n_sources": cfg.sparse_sources,
                   "n_receivers": cfg.sparse_receivers},
        "ring_radius": cfg.ring_radius,
        "grid_n": cfg.grid_n,
        "time_steps": cfg.time_steps,
        "sample_dt": cfg.dt,
    })


def load_cubes(cfg: ExperimentConfig, out: Path, which: str) -> list[WaveformCube]:
    acq = cfg.acquisition("dense" if which in ("dense", "upscaled") else "sparse")
    name = {"dense": "cubes_dense.apst", "sparse": "cubes_sparse.apst",
            "upscaled": "upscaled.apst"}[which]
    sections = read_tensors(out / name)
    return [WaveformCube(values=sections[f"cube_{i:04d}"].astype(np.float64),
                         acquisition=acq)
            for i in range(cfg.phantom_count)]


def _split(items, n_test: int):
    return items[:-n_test], items[-n_test:]


def stage_train_wave(cfg: ExperimentConfig, out: Path) -> None:
    if cfg.densities_equal:
        _write_json(out / "upscaler.json", {"skipped": True,
                                            "reason": "sparse equals dense"})
        return
    sparse = load_cubes(cfg, out, "sparse")
    dense = load_cubes(cfg, out, "dense")
    n_test = cfg.n_test()
    pairs = list(zip(*(_split(sparse, n_test)[0], _split(dense, n_test)[0])))
    model, history = train_upscaler(pairs, cfg.upscaler_cfg())
    sections = store_sections(model.store)
    sections["norm_scale"] = np.array([model.norm_scale], dtype=np.float64)
    write_tensors(out / "upscaler.apst", sections)
    _write_json(out / "upscaler.json", {
        "skipped": False,
        "in_density": list(model.in_density),
        "out_density": list(model.out_density),
        "time_steps": model.time_steps,
        "base_channels": cfg.upscaler_base_channels,
        "loss_history": history,
    })


def load_upscaler(cfg: ExperimentConfig, out: Path) -> UpscalerModel:
    meta = json.loads((out / "upscaler.json").read_text())
    if meta.get("skipped"):
        raise DataError("upscaler stage was skipped (sparse equals dense)")
    sections = read_tensors(out / "upscaler.apst")
    k = meta["time_steps"]
    recv_spec = plan_upscaler(meta["out_density"][1], k, meta["base_channels"])
    store = ParamStore()
    _, recv_net = build_upscaler(recv_spec, seed=0)
    for p in recv_net.params():
        p.name = "recv." + p.name
        store.register(p)
    src_net = None
    if meta["out_density"][0] != meta["in_density"][0]:
        src_spec = plan_upscaler(meta["out_density"][0], k,
                                 meta["base_channels"])
        _, src_net = build_upscaler(src_spec, seed=0)
        for p in src_net.params():
            p.name = "src." + p.name
            store.register(p)
    load_store(store, sections)
    return UpscalerModel(store=store, recv_net=recv_net, src_net=src_net,
                         norm_scale=float(sections["norm_scale"][0]),
                         in_density=tuple(meta["in_density"]),
                         out_density=tuple(meta["out_density"]),
                         time_steps=k)


def stage_upscale(cfg: ExperimentConfig, out: Path) -> None:
    if cfg.densities_equal:
        return
    model = load_upscaler(cfg, out)
    sparse = load_cubes(cfg, out, "sparse")
    dense_cfg = cfg.acquisition("dense")
    up = {f"cube_{i:04d}": upscale(model, c, dense_cfg).values.astype(np.float32)
          for i, c in enumerate(sparse)}
    write_tensors(out / "upscaled.apst", up)


def _fwi_inputs(cfg: ExperimentConfig, out: Path) -> list[WaveformCube]:
    # degenerate path: densities equal, train directly on the raw cubes
    if cfg.densities_equal:
        return load_cubes(cfg, out, "dense")
    return load_cubes(cfg, out, "upscaled")


def stage_train_fwi(cfg: ExperimentConfig, out: Path) -> None:
    cubes = _fwi_inputs(cfg, out)
    maps = load_phantoms(cfg, out)
    n_test = cfg.n_test()
    pairs = list(zip(_split(cubes, n_test)[0], _split(maps, n_test)[0]))
    model, history = train_fwi(pairs, cfg.fwi_cfg())
    sections = store_sections(model.store)
    sections["norm_scale"] = np.array([model.norm_scale], dtype=np.float64)
    write_tensors(out / "fwi.apst", sections)
    _write_json(out / "fwi.json", {
        "in_density": list(model.in_density),
        "input_hw": list(model.net_spec.input_hw),
        "map_n": model.net_spec.map_n,
        "speed_range": list(model.net_spec.speed_range),
        "encoded_channels": model.enc_spec.encoded_channels,
        "random_mask": model.enc_spec.random_mask,
        "se_enabled": model.net_spec.se_enabled,
        "se_reduction": model.net_spec.se_reduction,
        "base_channels": model.net_spec.base_channels,
        "channel_cap": model.net_spec.channel_cap,
        "map_dx": cfg.dx,
        "loss_history": history,
    })


def load_fwi(cfg: ExperimentConfig, out: Path) -> FwiModel:
    meta = json.loads((out / "fwi.json").read_text())
    sections = read_tensors(out / "fwi.apst")
    enc_spec = SourceEncodingSpec(
        input_sources=meta["in_density"][0],
        encoded_channels=meta["encoded_channels"],
        random_mask=meta["random_mask"])
    net_spec = InversionNetSpec(
        in_channels=meta["encoded_channels"],
        input_hw=tuple(meta["input_hw"]),
        map_n=meta["map_n"],
        speed_range=tuple(meta["speed_range"]),
        base_channels=meta["base_channels"],
        channel_cap=meta["channel_cap"],
        se_enabled=meta["se_enabled"],
        se_reduction=meta["se_reduction"])
    store, net = build_fwi(enc_spec, net_spec, seed=0)
    load_store(store, sections)
    return FwiModel(store=store, net=net, enc_spec=enc_spec,
                    net_spec=net_spec,
                    norm_scale=float(sections["norm_scale"][0]),
                    map_dx=meta["map_dx"],
                    in_density=tuple(meta["in_density"]))


def stage_evaluate(cfg: ExperimentConfig, out: Path) -> MetricReport:
    model = load_fwi(cfg, out)
    cubes = _fwi_inputs(cfg, out)
    maps = load_phantoms(cfg, out)
    n_test = cfg.n_test()
    test_cubes = _split(cubes, n_test)[1]
    test_maps = _split(maps, n_test)[1]
    recons = [reconstruct(model, c) for c in test_cubes]
    write_tensors(out / "reconstructions.apst",
                  {f"recon_{i:04d}": r.values for i, r in enumerate(recons)})
    dyn = cfg.speed_range[1] - cfg.speed_range[0]
    report = compute_report(recons, test_maps, dyn)
    doc = report.to_dict()
    doc["n_train"] = cfg.phantom_count - n_test
    doc["n_test"] = n_test
    doc["degenerate_dense_input"] = cfg.densities_equal

    if not cfg.densities_equal:
        sparse_test = _split(load_cubes(cfg, out, "sparse"), n_test)[1]
        dense_test = _split(load_cubes(cfg, out, "dense"), n_test)[1]
        up_test = _split(load_cubes(cfg, out, "upscaled"), n_test)[1]
        dense_cfg = cfg.acquisition("dense")
        cos = {"aps": [], "nearest": [], "zero_fill": []}
        for sp, dn, up in zip(sparse_test, dense_test, up_test):
            cos["aps"].append(cosine_similarity(up, dn))
            cos["nearest"].append(
                cosine_similarity(nearest_interp(sp, dense_cfg), dn))
            cos["zero_fill"].append(
                cosine_similarity(interleave_zeros(sp, dense_cfg).values,
                                  dn.values))
        doc["upscaler_cosine"] = {
            k: {"values": v, "mean": float(np.mean(v))} for k, v in cos.items()
        }

    _write_json(out / "report.json", doc)
    with (out / "report.csv").open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["index", "ssim", "psnr"])
        for i, (s, p) in enumerate(zip(report.ssim_values, report.psnr_values)):
            wr.writerow([i, repr(s), repr(p)])
    return report


# ---------------------------------------------------------------------------

_STAGE_FNS = {
    "phantoms": stage_phantoms,
    "simulate": stage_simulate,
    "train-wave": stage_train_wave,
    "upscale": stage_upscale,
    "train-fwi": stage_train_fwi,
    "evaluate": stage_evaluate,
}


def run_stage(name: str, cfg: ExperimentConfig, out: Path):
    if name not in _STAGE_FNS:
        raise UsctError(f"unknown stage {name!r}")
    out.mkdir(parents=True, exist_ok=True)
    try:
        return _STAGE_FNS[name](cfg, out)
    except Exception as e:
        status = {"failed_stage": name, "error": str(e)}
        try:
            _write_json(out / "status.json", status)
        except OSError:
            pass
        raise UsctError(f"stage {name!r} failed: {e}") from e


def run_pipeline(cfg: ExperimentConfig, out: Path) -> MetricReport:
    """All stages in order; deterministic in (config, seed)."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json() + "\n")
    completed = []
    report = None
    for name in STAGES:
        result = run_stage(name, cfg, out)
        if name == "evaluate":
            report = result
        completed.append(name)
        _write_json(out / "status.json", {"completed_stages": completed})
    return report


# ---------------------------------------------------------------------------
# cost accounting


def emit_cost_table(rows) -> str:
    """CSV comparing dense-input baselines against sparse+upscaled runs.

    Each row is a dict:
        {"baseline": {"n_sources", "n_receivers", "ssim"},
         "aps": {"in_sources", "in_receivers",
                 "out_sources", "out_receivers", "ssim"}}
    Element counts are sources + receivers; the upscaled run only ever
    builds its sparse input hardware. Reduction is baseline/aps elements.
    """
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["baseline_config", "baseline_ssim", "baseline_elements",
                 "aps_config", "aps_ssim", "aps_elements",
                 "ssim_degradation", "hw_reduction"])
    for row in rows:
        b, a = row["baseline"], row["aps"]
        b_elem = int(b["n_sources"]) + int(b["n_receivers"])
        a_elem = int(a["in_sources"]) + int(a["in_receivers"])
        wr.writerow([
            f"({b['n_sources']},{b['n_receivers']})",
            repr(float(b["ssim"])),
            b_elem,
            f"({a['in_sources']},{a['in_receivers']})->"
            f"({a['out_sources']},{a['out_receivers']})",
            repr(float(a["ssim"])),
            a_elem,
            repr(float(b["ssim"]) - float(a["ssim"])),
            repr(b_elem / a_elem),
        ])
    return buf.getvalue()


def _row_ssim(entry, base: Path) -> float:
    if isinstance(entry, (int, float)):
        return float(entry)
    if isinstance(entry, dict) and "report" in entry:
        doc = json.loads((base / entry["report"]).read_text()
                         if not Path(entry["report"]).is_absolute()
                         else Path(entry["report"]).read_text())
        return float(doc["ssim_mean"])
    raise UsctError(f"cannot interpret ssim entry {entry!r}")


def cost_table_from_spec(spec_path: Path, out: Path) -> str:
    """Build the cost table from a JSON row-spec file and write the CSV."""
    doc = json.loads(Path(spec_path).read_text())
    base = Path(spec_path).parent
    rows = []
    for r in doc["rows"]:
        b, a = dict(r["baseline"]), dict(r["aps"])
        b["ssim"] = _row_ssim(b.get("ssim"), base)
        a["ssim"] = _row_ssim(a.get("ssim"), base)
        rows.append({"baseline": b, "aps": a})
    csv_text = emit_cost_table(rows)
    out.mkdir(parents=True, exist_ok=True)
    (out / "cost_table.csv").write_text(csv_text)
    return csv_text
