import io
import json
import contextlib
from pathlib import Path

import numpy as np
import pytest

from decotab.cli import main

GOLDEN = Path(__file__).parent / "golden"


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


def golden_match(name, got):
    assert got == (GOLDEN / name).read_text()


class TestCheck:
    def test_thick6_text_golden(self):
        code, out, _ = run("check", "--model", "thick6")
        assert code == 0
        golden_match("check_thick6.txt", out)

    def test_chain3_json_golden(self):
        code, out, _ = run("check", "--model", "chain3", "--format", "json")
        assert code == 0
        golden_match("check_chain3.json", out)

    def test_non_decomposable_exits_1_with_cycle(self, tmp_path):
        model = tmp_path / "cycle.json"
        model.write_text(json.dumps({
            "variables": [{"name": v, "levels": 2} for v in "abcd"],
            "edges": [["a", "b"], ["b", "c"], ["c", "d"], ["d", "a"]],
        }))
        code, out, _ = run("check", "--model", str(model))
        assert code == 1
        assert "chordless cycle" in out
        assert set("abcd") == set(out.split(":")[1].strip().split("-"))

    def test_missing_file_exits_1(self):
        code, _, err = run("check", "--model", "no-such-file.json")
        assert code == 1
        assert "no-such-file" in err

    def test_bad_flags_exit_1(self):
        code, _, err = run("check")
        assert code == 1


class TestTransform:
    @pytest.fixture()
    def pcond_dump(self, tmp_path):
        code, out, _ = run("sample", "--model", "thick6", "--n", "1", "--seed", "9")
        assert code == 0
        path = tmp_path / "pcond.json"
        path.write_text(json.dumps(json.loads(out)["draws"][0]))
        return path

    def test_round_trips_reproduce_dump(self, pcond_dump, tmp_path):
        for mid in ("xi", "cond", "cliq", "mod"):
            code, fwd, _ = run(
                "transform", "--model", "thick6", "--from", "pcond", "--to", mid,
                "--params", str(pcond_dump),
            )
            assert code == 0
            mid_path = tmp_path / f"{mid}.json"
            mid_path.write_text(fwd)
            code, back, _ = run(
                "transform", "--model", "thick6", "--from", mid, "--to", "pcond",
                "--params", str(mid_path),
            )
            assert code == 0
            orig = json.loads(pcond_dump.read_text())
            got = json.loads(back)
            worst = max(
                abs(a - b)
                for b0, b1 in zip(orig["blocks"], got["blocks"])
                for a, b in zip(b0["probs"], b1["probs"])
            )
            assert worst < 1e-9

    def test_output_consumable_by_next_command(self, pcond_dump, tmp_path):
        code, out, _ = run(
            "transform", "--model", "thick6", "--from", "pcond", "--to", "mod",
            "--params", str(pcond_dump), "--out", str(tmp_path / "mod.json"),
        )
        assert code == 0 and out == ""
        code, out2, _ = run(
            "transform", "--model", "thick6", "--from", "mod", "--to", "cliq",
            "--params", str(tmp_path / "mod.json"),
        )
        assert code == 0
        assert json.loads(out2)["kind"] == "cliq"

    def test_kind_mismatch_exits_1(self, pcond_dump):
        code, _, err = run(
            "transform", "--model", "thick6", "--from", "mod", "--to", "cliq",
            "--params", str(pcond_dump),
        )
        assert code == 1
        assert "kind" in err


class TestLoglikPriorPosterior:
    def test_loglik_agrees_with_library(self, tmp_path):
        from decotab.graphs import perfect_order
        from decotab.modelio import load_fixture, theta_to_dict, to_json_text
        from decotab.oracle import direct_loglik
        from decotab.params import cliq_from_cond, theta_cond_from_p
        from decotab.randgen import random_cond_probs, random_table

        g, spec = load_fixture("chain3")
        order = perfect_order(g)
        rng = np.random.default_rng(8)
        p = random_cond_probs(rng, order, spec).joint()
        t = random_table(rng, p, 60)
        rows = []
        for cell, n in np.ndenumerate(t.counts):
            rows += [",".join(map(str, cell))] * int(n)
        data = tmp_path / "data.csv"
        data.write_text("a,b,c\n" + "\n".join(rows) + "\n")
        cliq = cliq_from_cond(theta_cond_from_p(p, order), order, spec)
        params = tmp_path / "cliq.json"
        params.write_text(to_json_text(theta_to_dict(cliq, order, spec)))
        code, out, _ = run(
            "loglik", "--model", "chain3", "--data", str(data),
            "--as", "cliq", "--params", str(params), "--format", "json",
        )
        assert code == 0
        assert json.loads(out)["loglik"] == pytest.approx(
            direct_loglik(p, t), abs=1e-10
        )

    def test_prior_golden(self):
        code, out, _ = run("prior", "--model", "chain3", "--format", "json")
        assert code == 0
        golden_match("prior_chain3.json", out)

    def test_theta_prior_dump_has_rational_counts(self):
        code, out, _ = run("prior", "--model", "chain3", "--as", "cliq", "--format", "json")
        assert code == 0
        doc = json.loads(out)
        assert doc["statistics"] == "cliq"
        assert all("/" in e["value"] or e["value"].isdigit()
                   for e in doc["fictitious_counts"])

    def test_posterior_halves(self, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text("a,b,c\n0,0,0\n1,1,1\n")
        code, out, _ = run("posterior", "--model", "chain3", "--data", str(data),
                           "--format", "json")
        assert code == 0
        doc = json.loads(out)
        alphas = [a for b in doc["blocks"] for a in b["alpha"]]
        assert all(a.endswith("/2") for a in alphas)


class TestSample:
    def test_seed_reproducibility(self):
        _, out1, _ = run("sample", "--model", "chain3", "--n", "3", "--seed", "7")
        _, out2, _ = run("sample", "--model", "chain3", "--n", "3", "--seed", "7")
        assert out1 == out2
        _, out3, _ = run("sample", "--model", "chain3", "--n", "3", "--seed", "8")
        assert out1 != out3

    def test_sample_as_mod_is_valid_dump(self, tmp_path):
        code, out, _ = run(
            "sample", "--model", "chain3", "--n", "2", "--seed", "4", "--as", "mod"
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["source"] == "prior" and len(doc["draws"]) == 2
        assert all(d["kind"] == "mod" for d in doc["draws"])

    def test_posterior_sampling_uses_data(self, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text("a,b,c\n0,0,0\n")
        code, out, _ = run(
            "sample", "--model", "chain3", "--data", str(data),
            "--n", "1", "--seed", "4",
        )
        assert code == 0
        assert json.loads(out)["source"] == "posterior"


class TestCut:
    def test_table_golden_text(self):
        code, out, _ = run("cut", "--model", "branch11", "--set", "1,2,3,4")
        assert code == 0
        golden_match("cut_branch11.txt", out)

    def test_table_golden_json(self):
        code, out, _ = run("cut", "--model", "branch11", "--set", "1,2,3,4",
                           "--format", "json")
        assert code == 0
        golden_match("cut_branch11.json", out)

    def test_prior_inventory_golden(self):
        code, out, _ = run("cut", "--model", "branch11", "--set", "1,2,3,4", "--prior")
        assert code == 0
        golden_match("cut_prior_branch11.txt", out)

    def test_non_cut_exits_1(self):
        code, out, _ = run("cut", "--model", "branch11", "--set", "1,2,4")
        assert code == 1
        assert "not a cut" in out

    def test_unknown_vertex_exits_1(self):
        code, _, err = run("cut", "--model", "branch11", "--set", "1,2,zzz")
        assert code == 1
        assert "zzz" in err


class TestVerify:
    def test_single_model_passes(self):
        code, out, _ = run("verify", "--graph", "chain3", "--seed", "1")
        assert code == 0
        assert "checks passed" in out

    def test_json_format(self):
        code, out, _ = run("verify", "--graph", "chain3", "--seed", "1",
                           "--format", "json")
        assert code == 0
        doc = json.loads(out)
        assert doc["all_passed"] is True
        assert all(c["passed"] for c in doc["checks"])


class TestExitCodes:
    def test_internal_defect_exits_2(self, monkeypatch):
        import decotab.cli as cli

        def boom(path):
            raise RuntimeError("simulated defect")

        monkeypatch.setattr(cli, "_load", boom)
        code, _, err = run("check", "--model", "chain3")
        assert code == 2
        assert "internal error" in err


class TestSampleEdges:
    def test_zero_draws(self):
        code, out, _ = run("sample", "--model", "chain3", "--n", "0", "--seed", "1")
        assert code == 0
        assert json.loads(out)["draws"] == []

    def test_negative_draws_rejected(self):
        code, _, err = run("sample", "--model", "chain3", "--n", "-1", "--seed", "1")
        assert code == 1
