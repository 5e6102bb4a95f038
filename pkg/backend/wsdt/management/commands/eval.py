from concurrent.futures import ThreadPoolExecutor
import json
import logging
from pathlib import Path

from django.conf import settings

from ...exceptions import ConfigurationError, DimensionError
from ...metrics import MetricReport, evaluate
from ...utils.degradation import DEGRADATIONS
from ...utils.image_io import NETPBM_SUFFIXES, PNG_SUFFIX, read_image, to_unit_pixels
from ..base import WSDTCommand

logger = logging.getLogger(__name__)


def list_images(directory):
    """Image files of a directory keyed by stem, in name order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigurationError(f"{directory} is not a directory")
    suffixes = set(NETPBM_SUFFIXES) | {PNG_SUFFIX}
    files = sorted(path for path in directory.iterdir() if path.suffix.lower() in suffixes)
    images = {}
    for path in files:
        if path.stem in images:
            raise ConfigurationError(f"{directory} holds two images named {path.stem}")
        images[path.stem] = path
    return images


def infer_scale(hr, lr, name):
    """Upscale factor between an HR and an LR image of the same scene."""
    if lr.shape[0] == 0 or hr.shape[0] % lr.shape[0] or hr.shape[2] != lr.shape[2]:
        raise DimensionError(f"{name}: HR {hr.shape} is not an integer multiple of LR {lr.shape}")
    scale = hr.shape[0] // lr.shape[0]
    if scale < 2 or hr.shape[1] != lr.shape[1] * scale:
        raise DimensionError(f"{name}: HR {hr.shape} and LR {lr.shape} do not share one scale >= 2")
    return scale


class Command(WSDTCommand):
    help = "Score SR images against HR references and LR inputs (PSNR, SSIM, Cons.)"

    def add_arguments(self, parser):
        parser.add_argument("sr_dir", help="Super-resolved images")
        parser.add_argument("hr_dir", help="Ground-truth HR images, same names")
        parser.add_argument("lr_dir", help="LR inputs, same names")
        parser.add_argument("--degradation", choices=DEGRADATIONS, default="box", help="Operator used for Cons.")
        parser.add_argument("--out", default=None, help="Directory for report.json and report.txt")

    def run(self, *args, **options):
        sr_files = list_images(options["sr_dir"])
        hr_files = list_images(options["hr_dir"])
        lr_files = list_images(options["lr_dir"])
        if not sr_files:
            raise ConfigurationError(f"no images found in {options['sr_dir']}")
        if not len(sr_files) == len(hr_files) == len(lr_files):
            raise ConfigurationError(
                f"image counts differ: {len(sr_files)} SR, {len(hr_files)} HR, {len(lr_files)} LR"
            )
        if not set(sr_files) == set(hr_files) == set(lr_files):
            missing = sorted((set(sr_files) ^ set(hr_files)) | (set(sr_files) ^ set(lr_files)))
            raise ConfigurationError(f"image names differ between directories: {missing}")

        degradation = options["degradation"]
        psnr_cap = settings.WSDT_PSNR_CAP
        names = list(sr_files)

        def score(name):
            sr = read_image(sr_files[name])
            hr = read_image(hr_files[name])
            lr = read_image(lr_files[name])
            if sr.shape != hr.shape:
                raise DimensionError(f"{name}: SR {sr.shape} and HR {hr.shape} differ")
            scale = infer_scale(hr, lr, name)
            report = evaluate(
                to_unit_pixels(sr), to_unit_pixels(hr), to_unit_pixels(lr),
                scale, degradation=degradation, psnr_cap=psnr_cap,
            )
            return scale, report

        workers = max(1, min(settings.WSDT_THREADS, len(names)))
        logger.info(f"Evaluating {len(names)} images with {workers} threads")
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(score, names))

        scales = {scale for scale, _ in results}
        if len(scales) != 1:
            raise DimensionError(f"images use different scales: {sorted(scales)}")
        reports = {name: report for name, (_, report) in zip(names, results)}
        mean = MetricReport.mean(list(reports.values()), degradation=degradation)

        lines = [f"count={len(names)}", f"scale={scales.pop()}"]
        for name, report in reports.items():
            lines.extend(report.to_lines(prefix=f"{name}."))
        lines.extend(mean.to_lines(prefix="mean."))
        for line in lines:
            self.stdout.write(line)

        if options["out"]:
            out = self.output_dir(options["out"])
            document = {
                "count": len(names),
                "scale": results[0][0],
                "images": {name: report.to_dict() for name, report in reports.items()},
                "mean": mean.to_dict(),
            }
            (out / "report.json").write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            (out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
            self.stdout.write(self.style.SUCCESS(f">>> Wrote {out / 'report.json'} and {out / 'report.txt'}"))
        else:
            self.stdout.write(self.style.SUCCESS(f">>> Evaluated {len(names)} image(s)"))
