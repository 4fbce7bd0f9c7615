import json

import numpy as np
import pytest

from cbt.cli import main
from cbt.keyspace import load_key_set
from cbt.template import load_template

SIDE = ["--side", "33"]


@pytest.fixture
def corpus(tmp_path):
    out = tmp_path / "data"
    assert main(["synth", "--subjects", "4", "--samples", "3", "--side", "33", "--seed", "2",
                 "--out", str(out)]) == 0
    return out


@pytest.fixture
def key(tmp_path):
    path = tmp_path / "k.json"
    assert main(["keygen", "--n", "15", "--seed", "4", "--out", str(path), *SIDE]) == 0
    return path


def test_keygen_full_length(tmp_path, capsys):
    out = tmp_path / "k.json"
    assert main(["keygen", "--l", "477144", "--n", "20", "--seed", "7", "--out", str(out)]) == 0
    ks = load_key_set(out)
    assert ks.n == 20 and ks.feature_length == 477144
    assert all(sum(v.windows) == 477144 for v in ks.vectors)
    assert "n=20" in capsys.readouterr().out


def test_keygen_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        main(["keygen", "--l", "500", "--n", "15", "--seed", "1", "--out", str(p)])
    assert a.read_bytes() == b.read_bytes()


def test_verify_own_sample_scores_zero(tmp_path, corpus, key, capsys):
    t = tmp_path / "t.cbt"
    img = corpus / "1_1.png"
    assert main(["enroll", "--key", str(key), "--image", str(img), "--out", str(t), *SIDE]) == 0
    capsys.readouterr()
    assert main(["verify", "--key", str(key), "--image", str(img), "--template", str(t), *SIDE]) == 0
    out = capsys.readouterr().out
    assert "decision=accept" in out and "score=0.0" in out


def test_verify_exit_code_matches_decision(tmp_path, corpus, key, capsys):
    t = tmp_path / "t.cbt"
    main(["enroll", "--key", str(key), "--image", str(corpus / "1_1.png"), "--out", str(t), *SIDE])
    args = ["verify", "--key", str(key), "--image", str(corpus / "2_1.png"), "--template", str(t), *SIDE]
    assert main([*args, "--threshold", "0"]) == 1
    assert "decision=reject" in capsys.readouterr().out
    assert main([*args, "--threshold", "1.01"]) == 0


def test_enroll_dataset_and_identify(tmp_path, corpus, key, capsys):
    gallery = tmp_path / "gallery"
    assert main(["enroll", "--key", str(key), "--dataset", str(corpus), "--out-dir", str(gallery), *SIDE]) == 0
    assert len(list(gallery.glob("*.cbt"))) == 12
    assert load_template(gallery / "3_2.cbt").n == 15
    ranked = tmp_path / "rank.csv"
    assert main(["identify", "--key", str(key), "--image", str(corpus / "3_2.png"), "--gallery", str(gallery),
                 "--out", str(ranked), *SIDE]) == 0
    rows = ranked.read_text().splitlines()
    assert rows[0] == "rank,subject,score" and rows[1].startswith("1,3,0.0")
    assert len(rows) == 5


def test_extract_needs_unsafe_flag(tmp_path, corpus, capsys):
    out = tmp_path / "f.npy"
    code = main(["extract", "--image", str(corpus / "1_1.png"), "--out", str(out), *SIDE])
    assert code > 1 and not out.exists()
    assert capsys.readouterr().err.startswith("code=CONFIG detail=")
    assert main(["extract", "--image", str(corpus / "1_1.png"), "--out", str(out), "--unsafe-dump", *SIDE]) == 0
    assert np.load(out).shape == (24 * 33 * 33,)


def test_keyspace_prints_three_counts(capsys):
    assert main(["keyspace", "--l", "40"]) == 0
    out = dict(line.split("=") for line in capsys.readouterr().out.split())
    assert out["paper_partition_count"] == "35250"
    assert out["exact_bounded_partition_count"] == "5663"
    assert int(out["exact_bounded_composition_count"]) > 5663


def test_evaluate_outputs_and_rerun_bytes(tmp_path, capsys):
    args = ["evaluate", "--subjects", "5", "--samples", "4", "--train", "2", "--test", "2",
            "--verification-n", "15", "--identification-n", "15", "--seed", "1", *SIDE]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([*args, "--out-dir", str(a)]) == 0
    assert main([*args, "--out-dir", str(b), "--jobs", "2"]) == 0
    for name in ("report.json", "roc.csv", "roc.svg", "cmc.csv", "cmc.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    rep = json.loads((a / "report.json").read_text())
    assert rep["summary"]["eer_mean"] is not None and rep["cmc"][-1] == 1.0
    assert (a / "roc.csv").read_text().startswith("threshold,far,frr\n")


def test_unlink(tmp_path, capsys):
    out = tmp_path / "u"
    assert main(["unlink", "--subjects", "4", "--samples", "3", "--bins", "10", *SIDE, "--out-dir", str(out)]) == 0
    data = json.loads((out / "unlinkability.json").read_text())
    assert data["n"] == 15 and data["mated_count"] == 12 and data["nonmated_count"] == 6
    assert 0 <= data["d_sys"] <= 1
    assert (out / "unlinkability.svg").exists()


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"version": 1, "n": 16, "seed": 3, "l": 300}))
    k1, k2 = tmp_path / "1.json", tmp_path / "2.json"
    main(["keygen", "--config", str(cfg), "--out", str(k1)])
    main(["keygen", "--config", str(cfg), "--n", "17", "--out", str(k2)])
    a, b = load_key_set(k1), load_key_set(k2)
    assert (a.n, a.feature_length, str(a.seed)) == (16, 300, "3")
    assert (b.n, b.feature_length) == (17, 300)


@pytest.mark.parametrize("content, detail", [
    ({"version": 2}, "version"),
    ({"version": 1, "colour": "red"}, "colour"),
])
def test_bad_config(tmp_path, capsys, content, detail):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(content))
    assert main(["keyspace", "--l", "10", "--config", str(cfg)]) == 3
    err = capsys.readouterr().err
    assert err.startswith("code=CONFIG") and detail in err and err.count("\n") == 1


def test_cbt_jobs_env(monkeypatch):
    from cbt.cli import _Options, build_parser
    args = build_parser().parse_args(["keyspace", "--l", "5"])
    monkeypatch.setenv("CBT_JOBS", "3")
    assert _Options(args, {}).jobs == 3
    assert _Options(args, {"jobs": 2}).jobs == 2


def test_error_codes_are_distinct(tmp_path, capsys, corpus, key):
    bad_key = tmp_path / "bad.json"
    bad_key.write_text("{}")
    bad_tpl = tmp_path / "bad.cbt"
    bad_tpl.write_bytes(b"nope")
    img = str(corpus / "1_1.png")
    codes = {
        "KEY_FILE": main(["verify", "--key", str(bad_key), "--image", img, "--template", str(bad_tpl), *SIDE]),
        "TEMPLATE_FILE": main(["verify", "--key", str(key), "--image", img, "--template", str(bad_tpl), *SIDE]),
        "INFEASIBLE_LENGTH": main(["keygen", "--l", "1", "--out", str(tmp_path / "x.json")]),
        "PROTOCOL": main(["evaluate", "--dataset", str(corpus), "--train", "3", "--test", "2", *SIDE,
                          "--out-dir", str(tmp_path / "e")]),
        "IO": main(["enroll", "--key", str(key), "--image", str(tmp_path / "missing.png"),
                    "--out", str(tmp_path / "m.cbt"), *SIDE]),
    }
    err = capsys.readouterr().err.splitlines()
    assert [line.split()[0] for line in err] == [f"code={name}" for name in codes]
    assert len(set(codes.values())) == len(codes) and min(codes.values()) > 1


def test_incomparable_template(tmp_path, corpus, key, capsys):
    t = tmp_path / "t.cbt"
    main(["enroll", "--key", str(key), "--image", str(corpus / "1_1.png"), "--out", str(t), *SIDE])
    other = tmp_path / "k16.json"
    main(["keygen", "--n", "16", "--out", str(other), *SIDE])
    code = main(["verify", "--key", str(other), "--image", str(corpus / "1_1.png"), "--template", str(t), *SIDE])
    assert code == 11
    assert "code=INCOMPARABLE_TEMPLATE" in capsys.readouterr().err
