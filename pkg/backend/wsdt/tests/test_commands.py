from io import StringIO
import json
from pathlib import Path
import shutil
import tempfile
from unittest import mock

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from wsdt.management.base import seed_type
from wsdt.training import loss_recon
from wsdt.utils.image_io import read_image, write_image

RUN_CONFIG = {
    "model": {
        "image_size": 8, "scale": 2, "dim": 16, "n_heads": 2,
        "depth_le": 1, "depth_hd": 1, "mlp_ratio": 2.0,
    },
    "train": {"iterations": 2, "batch_size": 2, "disc_width": 8, "log_every": 1, "checkpoint_every": 0},
    "data": {"count": 3, "seed": 4},
}


class CommandTestCase(SimpleTestCase):
    """Shared temporary workspace for command tests"""

    def setUp(self):
        """Create a temporary directory removed after each test"""
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)
        self.rng = np.random.default_rng(0)

    def call(self, *args, **options):
        out = StringIO()
        call_command(*args, stdout=out, **options)
        return out.getvalue()

    def write_config(self, name="run.json", **overrides):
        document = json.loads(json.dumps(RUN_CONFIG))
        for section, values in overrides.items():
            document[section].update(values)
        path = self.tmp / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path


class WaveletCommandTests(CommandTestCase):
    """Test cases for the dwt and idwt commands"""

    def test_round_trip_is_byte_identical(self):
        for name, shape in (("colour.ppm", (16, 24, 3)), ("gray.pgm", (8, 8, 1))):
            source = self.tmp / name
            write_image(source, self.rng.integers(0, 256, shape, dtype=np.uint8))
            self.call("dwt", str(source), levels=3, out=str(self.tmp / "spectra"))
            stem = source.stem
            self.assertTrue((self.tmp / "spectra" / f"{stem}.spectrum{source.suffix}").exists())
            self.call("idwt", str(self.tmp / "spectra" / f"{stem}.spectrum.npz"), out=str(self.tmp / "back"))
            self.assertEqual((self.tmp / "back" / name).read_bytes(), source.read_bytes())

    def test_constant_input_visualization(self):
        source = self.tmp / "flat.ppm"
        write_image(source, np.full((8, 8, 3), 90, dtype=np.uint8))
        output = self.call("dwt", str(source), levels=2, out=str(self.tmp))
        self.assertIn("J=2", output)
        picture = read_image(self.tmp / "flat.spectrum.ppm")
        self.assertEqual(len(np.unique(picture[:2, :2])), 1)
        detail = picture.copy()
        detail[:2, :2] = 128
        self.assertTrue(np.all(detail == 128))

    def test_indivisible_dims(self):
        source = self.tmp / "odd.ppm"
        write_image(source, np.zeros((12, 12, 3), dtype=np.uint8))
        with self.assertRaises(CommandError) as context:
            self.call("dwt", str(source), levels=3, out=str(self.tmp / "spectra"))
        self.assertEqual(context.exception.returncode, 2)
        self.assertIn("dims not divisible", str(context.exception))

    def test_unsupported_input(self):
        source = self.tmp / "image.bmp"
        source.write_bytes(b"BM")
        with self.assertRaises(CommandError) as context:
            self.call("dwt", str(source), out=str(self.tmp))
        self.assertEqual(context.exception.returncode, 2)

    def test_out_must_be_directory(self):
        source = self.tmp / "a.ppm"
        write_image(source, np.zeros((4, 4, 3), dtype=np.uint8))
        blocker = self.tmp / "file"
        blocker.write_text("x")
        with self.assertRaises(CommandError) as context:
            self.call("dwt", str(source), out=str(blocker))
        self.assertEqual(context.exception.returncode, 2)

    def test_idwt_refuses_to_overwrite(self):
        source = self.tmp / "pic.ppm"
        original = self.rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
        write_image(source, original)
        self.call("dwt", str(source), levels=1, out=str(self.tmp))
        sidecar = str(self.tmp / "pic.spectrum.npz")
        write_image(source, np.zeros((8, 8, 3), dtype=np.uint8))
        with self.assertRaises(CommandError) as context:
            self.call("idwt", sidecar, out=str(self.tmp))
        self.assertEqual(context.exception.returncode, 2)
        self.assertIn("--force", str(context.exception))
        np.testing.assert_array_equal(read_image(source), 0)
        self.call("idwt", sidecar, out=str(self.tmp), force=True)
        np.testing.assert_array_equal(read_image(source), original)


class GenDataCommandTests(CommandTestCase):
    """Test cases for the gen_data command"""

    def test_writes_pairs(self):
        output = self.call("gen_data", config=str(self.write_config()), out=str(self.tmp / "data"))
        self.assertIn("3 pairs", output)
        hr = sorted(p.name for p in (self.tmp / "data" / "hr").iterdir())
        self.assertEqual(hr, ["0000.ppm", "0001.ppm", "0002.ppm"])
        self.assertEqual(read_image(self.tmp / "data" / "lr" / "0001.ppm").shape, (4, 4, 3))

    def test_seed_override(self):
        config = str(self.write_config())
        self.call("gen_data", config=config, out=str(self.tmp / "a"))
        self.call("gen_data", config=config, out=str(self.tmp / "b"), seed=4)
        self.call("gen_data", config=config, out=str(self.tmp / "c"), seed=5)
        first = (self.tmp / "a" / "hr" / "0000.ppm").read_bytes()
        self.assertEqual((self.tmp / "b" / "hr" / "0000.ppm").read_bytes(), first)
        self.assertNotEqual((self.tmp / "c" / "hr" / "0000.ppm").read_bytes(), first)

    def test_missing_field(self):
        path = self.tmp / "bad.json"
        document = json.loads(json.dumps(RUN_CONFIG))
        del document["model"]["dim"]
        path.write_text(json.dumps(document), encoding="utf-8")
        with self.assertRaises(CommandError) as context:
            self.call("gen_data", config=str(path), out=str(self.tmp / "data"))
        self.assertEqual(context.exception.returncode, 2)
        self.assertIn("model.dim", str(context.exception))

    def test_seed_type(self):
        self.assertEqual(seed_type("18446744073709551615"), 2**64 - 1)
        with self.assertRaises(ValueError):
            seed_type("-1")


class TrainSampleCommandTests(CommandTestCase):
    """Test cases for train, resume and sample"""

    def train(self, name, **train_overrides):
        config = self.write_config(f"{name}.json", train=train_overrides)
        out = self.tmp / name
        output = self.call("train", config=str(config), out=str(out))
        return out, output

    def test_train_writes_log_and_checkpoint(self):
        out, output = self.train("run")
        self.assertIn("iteration=2", output)
        self.assertTrue((out / "latest.wsdt").exists())
        self.assertTrue((out / "checkpoints" / "step_000002.wsdt").exists())
        records = [json.loads(line) for line in (out / "train_log.jsonl").read_text().splitlines()]
        self.assertEqual([record["iteration"] for record in records], [1, 2])
        self.assertEqual(
            set(records[0]), {"iteration", "t", "loss_d", "loss_g_adv", "loss_pixel", "loss_fre", "loss_g"}
        )

    def test_same_seed_same_log(self):
        first, _ = self.train("first")
        second, _ = self.train("second")
        self.assertEqual(
            (first / "train_log.jsonl").read_bytes(), (second / "train_log.jsonl").read_bytes()
        )

    def test_resume(self):
        out, _ = self.train("run")
        config = self.write_config("more.json", train={"iterations": 3})
        output = self.call("train", config=str(config), out=str(out), checkpoint=str(out / "latest.wsdt"))
        self.assertIn("Resuming from iteration 2", output)
        lines = (out / "train_log.jsonl").read_text().splitlines()
        self.assertEqual(json.loads(lines[-1])["iteration"], 3)

    def test_resume_geometry_mismatch(self):
        out, _ = self.train("run")
        config = self.write_config("wide.json", model={"dim": 24})
        with self.assertRaises(CommandError) as context:
            self.call("train", config=str(config), out=str(out), checkpoint=str(out / "latest.wsdt"))
        self.assertEqual(context.exception.returncode, 2)

    def test_non_finite_loss_exits_with_three(self):
        config = self.write_config("nan.json", train={"iterations": 4, "checkpoint_every": 0})
        out = self.tmp / "nan"

        def nan_recon(prediction, target, levels):
            pixel, frequency = loss_recon(prediction, target, levels)
            return pixel * np.nan, frequency

        with mock.patch("wsdt.training.trainer.loss_recon", side_effect=nan_recon):
            with self.assertRaises(CommandError) as context:
                self.call("train", config=str(config), out=str(out))
        self.assertEqual(context.exception.returncode, 3)
        self.assertIn("non-finite loss", str(context.exception))
        self.assertTrue((out / "latest.wsdt").exists())

    def test_sample_is_deterministic(self):
        out, _ = self.train("run")
        inputs = []
        for name in ("a.ppm", "b.ppm"):
            path = self.tmp / name
            write_image(path, self.rng.integers(0, 256, (4, 4, 3), dtype=np.uint8))
            inputs.append(str(path))
        checkpoint = str(out / "latest.wsdt")
        self.call("sample", *inputs, checkpoint=checkpoint, seed=11, out=str(self.tmp / "sr1"))
        self.call("sample", *inputs, checkpoint=checkpoint, seed=11, out=str(self.tmp / "sr2"))
        for name in ("a.ppm", "b.ppm"):
            first = (self.tmp / "sr1" / name).read_bytes()
            self.assertEqual(first, (self.tmp / "sr2" / name).read_bytes())
            self.assertEqual(read_image(self.tmp / "sr1" / name).shape, (8, 8, 3))

    def test_sample_geometry_mismatch(self):
        out, _ = self.train("run")
        path = self.tmp / "big.ppm"
        write_image(path, np.zeros((8, 8, 3), dtype=np.uint8))
        with self.assertRaises(CommandError) as context:
            self.call("sample", str(path), checkpoint=str(out / "latest.wsdt"), out=str(self.tmp / "sr"))
        self.assertEqual(context.exception.returncode, 2)


class EvalCommandTests(CommandTestCase):
    """Test cases for the eval command"""

    def setUp(self):
        """HR, LR and SR directories where SR equals HR"""
        super().setUp()
        for sub in ("hr", "lr"):
            (self.tmp / sub).mkdir()
        for name in ("x", "y"):
            hr = self.rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
            lr = np.rint(hr.reshape(8, 2, 8, 2, 3).mean(axis=(1, 3))).astype(np.uint8)
            write_image(self.tmp / "hr" / f"{name}.ppm", hr)
            write_image(self.tmp / "lr" / f"{name}.ppm", lr)
        shutil.copytree(self.tmp / "hr", self.tmp / "sr")

    def values(self, output):
        pairs = (line.split("=", 1) for line in output.splitlines() if "=" in line)
        return dict(pairs)

    def test_self_comparison(self):
        output = self.call(
            "eval", str(self.tmp / "sr"), str(self.tmp / "hr"), str(self.tmp / "lr"), out=str(self.tmp / "report")
        )
        values = self.values(output)
        self.assertEqual(values["count"], "2")
        self.assertEqual(values["scale"], "2")
        self.assertEqual(float(values["mean.psnr"]), 100.0)
        self.assertAlmostEqual(float(values["x.ssim"]), 1.0)
        self.assertLess(float(values["mean.cons"]), 1.0)
        report = json.loads((self.tmp / "report" / "report.json").read_text())
        self.assertEqual(sorted(report["images"]), ["x", "y"])
        self.assertEqual(report["mean"]["psnr"], 100.0)
        self.assertTrue((self.tmp / "report" / "report.txt").read_text().startswith("count=2\n"))

    def test_count_mismatch(self):
        (self.tmp / "lr" / "y.ppm").unlink()
        with self.assertRaises(CommandError) as context:
            self.call("eval", str(self.tmp / "sr"), str(self.tmp / "hr"), str(self.tmp / "lr"))
        self.assertEqual(context.exception.returncode, 2)
        self.assertIn("counts differ", str(context.exception))

    def test_name_mismatch(self):
        (self.tmp / "lr" / "y.ppm").rename(self.tmp / "lr" / "z.ppm")
        with self.assertRaises(CommandError) as context:
            self.call("eval", str(self.tmp / "sr"), str(self.tmp / "hr"), str(self.tmp / "lr"))
        self.assertIn("['y', 'z']", str(context.exception))

    def test_shape_mismatch(self):
        write_image(self.tmp / "sr" / "x.ppm", np.zeros((8, 8, 3), dtype=np.uint8))
        with self.assertRaises(CommandError) as context:
            self.call("eval", str(self.tmp / "sr"), str(self.tmp / "hr"), str(self.tmp / "lr"))
        self.assertEqual(context.exception.returncode, 2)
