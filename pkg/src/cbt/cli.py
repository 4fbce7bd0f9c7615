"""Command-line interface.

Option values are resolved as: command-line flag, then the JSON file given
with ``--config``, then the built-in default.  The config file uses the
same names as the flags (dashes become underscores) plus ``"version": 1``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import SplitProtocol, load_dataset, synth_generate, write_dataset
from .errors import CbtError, ConfigError
from .evaluation import ScoreSet, far_frr_curve
from .features import FilterBankConfig, build_filter_bank, extract_features, preprocess
from .keyspace import generate_key_set, keyspace_count, load_key_set, save_key_set
from .matching import DEFAULT_THRESHOLDS, identify, verify
from .protocol import ProtocolConfig, _score_range, run_protocol, run_unlinkability
from .report import write_csv, write_json, write_svg
from .template import generate_template, load_template, save_template

logger = logging.getLogger("cbt")

CONFIG_VERSION = 1
EXIT_IO = 16

DEFAULTS = {
    "side": 141,
    "scales": 4,
    "orientations": 6,
    "min_wavelength": 3.0,
    "multiplier": 1.7,
    "radial_bandwidth": 0.65,
    "angular_bandwidth": 1.3,
    "scale_factor": 100.0,
    "n": 20,
    "seed": 0,
    "l": None,
    "modality": "face",
    "threshold": None,
    "layout": "fvc",
    "train": 3,
    "test": 2,
    "subject_limit": None,
    "case": "worst",
    "verification_n": "20,20,20,25,25",
    "identification_n": "15,15,15,20,20",
    "num_thresholds": 2001,
    "bins": 100,
    "subjects": 25,
    "samples": 5,
    "sigma": 0.02,
    "max_shift": 2,
    "lo": 2,
    "hi": 20,
    "jobs": None,
    "dataset": None,
    "out_dir": None,
}

UNLINK_N = 15


class _Options:
    """Flag values layered over config-file values over DEFAULTS."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self._args = args
        self._config = config

    def __getattr__(self, name):
        value = getattr(self._args, name, None)
        if value is not None:
            return value
        if name in self._config:
            return self._config[name]
        if name == "jobs":
            return int(os.environ.get("CBT_JOBS", "1"))
        return DEFAULTS.get(name)


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict) or data.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config {path} must be a JSON object with \"version\": {CONFIG_VERSION}")
    unknown = set(data) - set(DEFAULTS) - {"version"}
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return {k: v for k, v in data.items() if k != "version"}


def _bank_config(o: _Options) -> FilterBankConfig:
    return FilterBankConfig(
        num_scales=int(o.scales), num_orientations=int(o.orientations),
        min_wavelength=float(o.min_wavelength), scale_multiplier=float(o.multiplier),
        radial_bandwidth=float(o.radial_bandwidth), angular_bandwidth=float(o.angular_bandwidth),
        image_side=int(o.side),
    )


def _ints(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    try:
        return tuple(int(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from None


def _features_for(path, o: _Options):
    cfg = _bank_config(o)
    bank = build_filter_bank(cfg)
    return extract_features(preprocess(path, cfg.image_side), bank, float(o.scale_factor))


def _threshold(o: _Options) -> float:
    if o.threshold is not None:
        return float(o.threshold)
    try:
        return DEFAULT_THRESHOLDS[o.modality]
    except KeyError:
        raise ConfigError(f"unknown modality {o.modality!r}; pass --threshold") from None


def _dataset(o: _Options):
    if o.dataset:
        return load_dataset(o.dataset, o.layout, side=int(o.side), modality=o.modality)
    return synth_generate(int(o.subjects), int(o.samples), float(o.sigma), seed=int(o.seed),
                          side=int(o.side), max_shift=int(o.max_shift))


# -- commands ----------------------------------------------------------------

def cmd_keygen(o: _Options) -> int:
    l = int(o.l) if o.l is not None else _bank_config(o).feature_length
    ks = generate_key_set(int(o.n), l, seed=int(o.seed), key_id=o.key_id)
    save_key_set(ks, o.out)
    print(f"key_id={ks.key_id} n={ks.n} l={ks.feature_length} out={o.out}")
    return 0


def cmd_extract(o: _Options) -> int:
    if not o.unsafe_dump:
        raise ConfigError("feature dumps contain unprotected biometric data; pass --unsafe-dump to confirm")
    f = _features_for(o.image, o)
    np.save(o.out, f)
    print(f"length={f.size} out={o.out}")
    return 0


def cmd_enroll(o: _Options) -> int:
    ks = load_key_set(o.key)
    if o.image:
        if not o.out:
            raise ConfigError("--image needs --out")
        t = generate_template(_features_for(o.image, o), ks)
        save_template(t, o.out)
        print(f"out={o.out} dim={len(t)}")
        return 0
    if not (o.dataset and o.out_dir):
        raise ConfigError("enroll needs either --image/--out or --dataset/--out-dir")
    ds = load_dataset(o.dataset, o.layout, side=int(o.side), modality=o.modality)
    bank = build_filter_bank(_bank_config(o))
    out = Path(o.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for sub, smp, img in ds.samples():
        t = generate_template(extract_features(img, bank, float(o.scale_factor)), ks)
        save_template(t, out / f"{sub}_{smp}.cbt")
        count += 1
    print(f"templates={count} out_dir={out}")
    return 0


def cmd_verify(o: _Options) -> int:
    ks = load_key_set(o.key)
    enrolled = [load_template(p) for p in o.template]
    query = generate_template(_features_for(o.image, o), ks)
    d = verify(query, enrolled, _threshold(o))
    print(f"decision={'accept' if d.accepted else 'reject'} score={d.best_score!r} threshold={d.threshold!r}")
    return 0 if d.accepted else 1


def _gallery(folder) -> dict:
    gallery: dict[str, list] = {}
    paths = sorted(Path(folder).glob("*.cbt"))
    if not paths:
        raise ConfigError(f"no .cbt templates in {folder}")
    for p in paths:
        subject = p.stem.rsplit("_", 1)[0] if "_" in p.stem else p.stem
        gallery.setdefault(subject, []).append(load_template(p))
    return gallery


def cmd_identify(o: _Options) -> int:
    ks = load_key_set(o.key)
    query = generate_template(_features_for(o.image, o), ks)
    res = identify(query, _gallery(o.gallery))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "subject", "score"])
    for k, (sid, score) in enumerate(res.ranking, start=1):
        w.writerow([k, sid, repr(score)])
    if o.out:
        Path(o.out).write_text(buf.getvalue())
        print(f"best={res.best[0]} score={res.best[1]!r} out={o.out}")
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_evaluate(o: _Options) -> int:
    ds = _dataset(o)
    cfg = ProtocolConfig(case=o.case, verification_ns=_ints(o.verification_n),
                         identification_ns=_ints(o.identification_n), master_seed=int(o.seed),
                         num_thresholds=int(o.num_thresholds), scale_factor=float(o.scale_factor),
                         jobs=int(o.jobs))
    split = SplitProtocol(int(o.train), int(o.test), None if o.subject_limit is None else int(o.subject_limit))
    report = run_protocol(ds, split, cfg, _bank_config(o))
    out = Path(o.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    if report.genuine_scores:
        scores = (report.genuine_scores, report.imposter_scores)
        lo, hi = _score_range(ScoreSet.of(*scores))
        curve = far_frr_curve(scores, cfg.num_thresholds, lo, hi)
        write_csv(out / "roc.csv", ["threshold", "far", "frr"], curve.rows())
        write_svg(out / "roc.svg", {"FAR": (curve.thresholds, curve.far), "FRR": (curve.thresholds, curve.frr)},
                  "FAR / FRR", "dissimilarity threshold", "rate")
    if report.cmc:
        ranks = list(range(1, len(report.cmc) + 1))
        write_csv(out / "cmc.csv", ["rank", "cmc"], zip(ranks, report.cmc))
        write_svg(out / "cmc.svg", {"CMC": (ranks, report.cmc)}, "Cumulative match characteristic",
                  "rank", "identification rate")
    s = report.summary
    print(" ".join(f"{k}={v!r}" for k, v in sorted(s.items())) + f" out_dir={out}")
    return 0


def cmd_unlink(o: _Options) -> int:
    ds = _dataset(o)
    n = o._args.n if o._args.n is not None else o._config.get("n", UNLINK_N)
    rep, mated, nonmated = run_unlinkability(ds, n=int(n), seed=int(o.seed), bins=int(o.bins),
                                             scale_factor=float(o.scale_factor),
                                             bank_config=_bank_config(o), jobs=int(o.jobs))
    out = Path(o.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = rep.to_dict()
    data.update({"n": int(n), "seed": int(o.seed), "mated_count": int(mated.size),
                 "nonmated_count": int(nonmated.size)})
    write_json(out / "unlinkability.json", data)
    write_csv(out / "unlinkability.csv", ["score", "d_link", "mated_density", "nonmated_density"],
              zip(rep.bin_centers, rep.d_local, rep.mated_density, rep.nonmated_density))
    write_svg(out / "unlinkability.svg",
              {"mated": (rep.bin_centers, rep.mated_density), "non-mated": (rep.bin_centers, rep.nonmated_density)},
              f"Score distributions (D_sys = {rep.d_sys:.3f})", "dissimilarity", "density")
    print(f"d_sys={rep.d_sys!r} mated={mated.size} nonmated={nonmated.size} out_dir={out}")
    return 0


def cmd_keyspace(o: _Options) -> int:
    if o.l is None:
        raise ConfigError("keyspace needs --l")
    c = keyspace_count(int(o.l), (int(o.lo), int(o.hi)))
    print(f"l={c.l}")
    print(f"paper_partition_count={c.paper_partition_count}")
    print(f"exact_bounded_partition_count={c.exact_bounded_partition_count}")
    print(f"exact_bounded_composition_count={c.exact_bounded_composition_count}")
    return 0


def cmd_synth(o: _Options) -> int:
    ds = synth_generate(int(o.subjects), int(o.samples), float(o.sigma), seed=int(o.seed),
                        side=int(o.side), max_shift=int(o.max_shift))
    paths = write_dataset(ds, o.out)
    print(f"subjects={len(ds)} images={len(paths)} out={o.out}")
    return 0


# -- parser ------------------------------------------------------------------

def _add_bank_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("filter bank")
    g.add_argument("--side", type=int, help="image side N (default 141)")
    g.add_argument("--scales", type=int, help="number of scales (default 4)")
    g.add_argument("--orientations", type=int, help="number of orientations (default 6)")
    g.add_argument("--min-wavelength", type=float, help="smallest wavelength in pixels (default 3)")
    g.add_argument("--multiplier", type=float, help="wavelength ratio between scales (default 1.7)")
    g.add_argument("--radial-bandwidth", type=float, help="radial bandwidth ratio (default 0.65)")
    g.add_argument("--angular-bandwidth", type=float, help="orientation spacing / angular sigma (default 1.3)")
    g.add_argument("--scale-factor", type=float, help="feature magnitude multiplier (default 100)")


def _add_dataset_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("dataset (synthetic when --dataset is absent)")
    g.add_argument("--dataset", help="dataset root directory")
    g.add_argument("--layout", choices=["fvc", "folders"], help="file layout (default fvc)")
    g.add_argument("--modality", help="modality tag: face or fingerprint (default face)")
    g.add_argument("--subjects", type=int, help="synthetic subjects (default 25)")
    g.add_argument("--samples", type=int, help="synthetic samples per subject (default 5)")
    g.add_argument("--sigma", type=float, help="synthetic pixel noise sd (default 0.02)")
    g.add_argument("--max-shift", type=int, help="synthetic max translation in pixels (default 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbt",
        description="Cancelable biometric templates: keys, enrollment, matching and evaluation.",
        epilog="Precedence: command-line flags > --config JSON file > defaults. "
               "Errors print 'code=NAME detail=...' and exit with a code > 1.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file with the same option names")
    common.add_argument("--jobs", type=int, help="worker threads (default $CBT_JOBS or 1)")
    common.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", parents=[common], help="generate a key set file")
    p.add_argument("--l", type=int, help="feature length (default p*q*N^2 of the filter bank)")
    p.add_argument("--n", type=int, help="number of random vectors (default 20)")
    p.add_argument("--seed", type=int, help="seed (default 0)")
    p.add_argument("--key-id", help="key id (default: hash of the vectors)")
    p.add_argument("--out", required=True)
    _add_bank_flags(p)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("extract", parents=[common], help="dump a raw feature vector (debug only)")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True, help=".npy output path")
    p.add_argument("--unsafe-dump", action="store_true", help="confirm writing unprotected features")
    _add_bank_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("enroll", parents=[common], help="create protected templates")
    p.add_argument("--key", required=True)
    p.add_argument("--image")
    p.add_argument("--out")
    p.add_argument("--dataset")
    p.add_argument("--layout", choices=["fvc", "folders"])
    p.add_argument("--modality")
    p.add_argument("--out-dir")
    _add_bank_flags(p)
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("verify", parents=[common], help="1:1 verification; exit 0 accept, 1 reject")
    p.add_argument("--key", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--template", required=True, action="append", help="enrolled template (repeatable)")
    p.add_argument("--threshold", type=float, help="accept if score < threshold")
    p.add_argument("--modality", help="face (0.45) or fingerprint (0.5) default threshold")
    _add_bank_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("identify", parents=[common], help="1:N identification against a template folder")
    p.add_argument("--key", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--gallery", required=True, help="folder of <subject>_<sample>.cbt files")
    p.add_argument("--out", help="ranked CSV (default stdout)")
    _add_bank_flags(p)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("evaluate", parents=[common], help="run the verification/identification protocol")
    _add_dataset_flags(p)
    p.add_argument("--train", type=int, help="training samples per subject (default 3)")
    p.add_argument("--test", type=int, help="test samples per subject (default 2)")
    p.add_argument("--subject-limit", type=int, help="use only the first K subjects")
    p.add_argument("--case", choices=["worst", "best"], help="shared or per-subject key sets (default worst)")
    p.add_argument("--verification-n", help="n per verification round (default 20,20,20,25,25)")
    p.add_argument("--identification-n", help="n per identification round (default 15,15,15,20,20)")
    p.add_argument("--num-thresholds", type=int, help="threshold grid size (default 2001)")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--out-dir", required=True)
    _add_bank_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("unlink", parents=[common], help="mated/non-mated unlinkability analysis")
    _add_dataset_flags(p)
    p.add_argument("--n", type=int, help="random vectors per key set (default 15)")
    p.add_argument("--bins", type=int, help="histogram bins (default 100)")
    p.add_argument("--seed", type=int, help="seed (default 0)")
    p.add_argument("--out-dir", required=True)
    _add_bank_flags(p)
    p.set_defaults(func=cmd_unlink)

    p = sub.add_parser("keyspace", parents=[common], help="count admissible random vectors for a length")
    p.add_argument("--l", type=int, help="feature length")
    p.add_argument("--lo", type=int, help="smallest window (default 2)")
    p.add_argument("--hi", type=int, help="largest window (default 20)")
    p.set_defaults(func=cmd_keyspace)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic dataset (fvc layout, 16-bit PNG)")
    p.add_argument("--subjects", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--max-shift", type=int)
    p.add_argument("--side", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        opts = _Options(args, _load_config(args.config))
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(opts)
    except CbtError as exc:
        print(f"code={exc.code} detail={exc}", file=sys.stderr)
        return exc.exit_status
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"code=IO detail={exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
