"""End-to-end checks of the artery command line.

usage: cli_test.py ARTERY_BINARY SCHEMA_DIR
"""

import hashlib
import json
import pathlib
import shutil
import subprocess
import sys
import tempfile
import unittest

import jsonschema

ARTERY = ""
SCHEMAS = pathlib.Path()


def artery(*args):
    return subprocess.run([ARTERY, *map(str, args)], capture_output=True, text=True)


def run_dir(proc):
    return pathlib.Path(proc.stdout.strip().splitlines()[-1])


def schema(name):
    return json.loads((SCHEMAS / name).read_text())


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Cli(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = pathlib.Path(tempfile.mkdtemp(prefix="artery-cli-"))
        proc = artery("generate", "--subjects", 6, "--preset", "low-noise", "--seed", 3, "--out", cls.tmp / "gen")
        assert proc.returncode == 0, proc.stderr
        cls.corpus = run_dir(proc)
        cls.subjects = sorted((cls.corpus / "subjects").glob("*.json"))

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)

    def test_usage_errors_exit_2(self):
        self.assertEqual(artery().returncode, 2)
        self.assertEqual(artery("frobnicate").returncode, 2)
        self.assertEqual(artery("cv", "--corpus", self.corpus, "--classes", "12").returncode, 2)
        self.assertEqual(artery("cv", "--corpus", self.corpus, "--model", "mlp").returncode, 2)
        self.assertEqual(artery("train", "--corpus", self.corpus, "--model", "all").returncode, 2)
        self.assertEqual(artery("generate", "--subjects", 0).returncode, 2)
        self.assertEqual(artery("--help").returncode, 0)

    def test_generated_files_match_schema(self):
        validator = jsonschema.Draft202012Validator(schema("subject.schema.json"))
        self.assertEqual(len(self.subjects), 6)
        for path in self.subjects:
            validator.validate(json.loads(path.read_text()))
        manifest = json.loads((self.corpus / "manifest.json").read_text())
        jsonschema.validate(manifest, schema("run_manifest.schema.json"))
        listed = set(manifest["artifacts"])
        self.assertTrue({f"subjects/{p.name}" for p in self.subjects} <= listed)
        for rel in listed:
            self.assertTrue((self.corpus / rel).is_file(), rel)
        census = json.loads((self.corpus / "corpus.json").read_text())
        self.assertEqual(census["num_subjects"], 6)

    def test_build_output_matches_schema(self):
        before = {p: digest(p) for p in self.subjects}
        proc = artery("build", *self.subjects, "--out", self.tmp / "build")
        self.assertEqual(proc.returncode, 0, proc.stderr)
        out = run_dir(proc)
        validator = jsonschema.Draft202012Validator(schema("segment_graph.schema.json"))
        graphs = sorted((out / "graphs").glob("*.json"))
        self.assertEqual(len(graphs), len(self.subjects))
        for path in graphs:
            doc = json.loads(path.read_text())
            validator.validate(doc)
            n = len(doc["nodes"])
            for i, j in doc["edges"]:
                self.assertLess(i, j)
                self.assertLess(j, n)
        jsonschema.validate(json.loads((out / "manifest.json").read_text()), schema("run_manifest.schema.json"))
        self.assertEqual(before, {p: digest(p) for p in self.subjects})

    def test_invalid_input_exits_1(self):
        bad = self.tmp / "bad.json"
        bad.write_text('{"subject_id": "x", "voxel_spacing_mm": 0.5, "branches": [')
        proc = artery("build", bad, "--out", self.tmp / "bad-out")
        self.assertEqual(proc.returncode, 1)
        self.assertIn("error", proc.stderr)

        dangling = json.loads(self.subjects[0].read_text())
        dangling["branches"][1]["points"][0] = [999.0, 999.0, 999.0]
        path = self.tmp / "dangling.json"
        path.write_text(json.dumps(dangling))
        proc = artery("build", path, "--out", self.tmp / "bad-out")
        self.assertEqual(proc.returncode, 1)
        self.assertIn("dangling", proc.stderr)

        proc = artery("cv", "--corpus", self.tmp / "missing")
        self.assertEqual(proc.returncode, 1)

    def test_train_then_eval_with_leakage_check(self):
        proc = artery("train", "--corpus", self.corpus, "--model", "sage", "--epochs", 5, "--hidden", 8,
                      "--out", self.tmp / "train")
        self.assertEqual(proc.returncode, 0, proc.stderr)
        checkpoint = run_dir(proc) / "checkpoint.json"
        trace = (run_dir(proc) / "loss_trace.csv").read_text().splitlines()
        self.assertEqual(trace[0], "epoch,loss")
        self.assertEqual(len(trace), 6)

        proc = artery("eval", "--checkpoint", checkpoint, "--corpus", self.corpus, "--out", self.tmp / "eval")
        self.assertEqual(proc.returncode, 0, proc.stderr)
        metrics = json.loads((run_dir(proc) / "metrics.json").read_text())
        self.assertEqual(metrics["class_mode"], 13)
        rows = (run_dir(proc) / "confusion.csv").read_text().splitlines()
        self.assertEqual(len(rows), 14)

        # Evaluating on training subjects violates out-of-fold evaluation.
        proc = artery("eval", "--checkpoint", checkpoint, "--corpus", self.corpus, "--check",
                      "--out", self.tmp / "eval")
        self.assertEqual(proc.returncode, 3)
        self.assertIn("training set", proc.stderr)

        held_out = self.tmp / "held-out"
        held_out.mkdir()
        doc = json.loads(self.subjects[0].read_text())
        doc["subject_id"] = "held-out-000"
        (held_out / "held-out-000.json").write_text(json.dumps(doc))
        proc = artery("eval", "--checkpoint", checkpoint, "--corpus", held_out, "--check", "--out", self.tmp / "eval")
        self.assertEqual(proc.returncode, 0, proc.stderr)

    def test_cv_replay_is_byte_identical(self):
        proc = artery("cv", "--corpus", self.corpus, "--model", "all", "--classes", "both", "--folds", 3,
                      "--epochs", 3, "--hidden", 8, "--check", "--out", self.tmp / "cv")
        self.assertEqual(proc.returncode, 0, proc.stderr)
        first = run_dir(proc)
        table = (first / "table.txt").read_text().splitlines()
        self.assertEqual(len(table), 5)
        self.assertEqual(table[0].split(), ["Graph", "Model", "F1-Score", "(11)", "F1-Score", "(13)"])
        self.assertEqual([row.split()[0] for row in table[1:]], ["GCN", "GAT", "GIN", "GraphSAGE"])
        for stem in ("gcn_11", "sage_13"):
            self.assertTrue((first / f"confusion_{stem}_normalized.csv").is_file())
        manifest = json.loads((first / "manifest.json").read_text())
        jsonschema.validate(manifest, schema("run_manifest.schema.json"))

        proc = artery("replay", first / "manifest.json", "--out", self.tmp / "replay")
        self.assertEqual(proc.returncode, 0, proc.stderr)
        second = run_dir(proc)
        self.assertNotEqual(first, second)
        self.assertEqual((first / "metrics.json").read_bytes(), (second / "metrics.json").read_bytes())

    def test_config_file_below_flags(self):
        config = self.tmp / "cv.toml"
        config.write_text('[cv]\nepochs = 2\nhidden = 4\nfolds = 2\nmodel = "gcn"\nclasses = "13"\n')
        proc = artery("cv", "--config", config, "--corpus", self.corpus, "--epochs", 1, "--out", self.tmp / "cfg")
        self.assertEqual(proc.returncode, 0, proc.stderr)
        recorded = json.loads((run_dir(proc) / "manifest.json").read_text())["config"]
        self.assertEqual(recorded["epochs"], 1)
        self.assertEqual(recorded["hidden"], 4)
        self.assertEqual(recorded["folds"], 2)
        table = (run_dir(proc) / "table.txt").read_text().splitlines()
        self.assertEqual(len(table), 2)
        self.assertNotIn("(11)", table[0])


if __name__ == "__main__":
    ARTERY = sys.argv[1]
    SCHEMAS = pathlib.Path(sys.argv[2])
    unittest.main(argv=sys.argv[:1], verbosity=2)
