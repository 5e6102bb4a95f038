from pathlib import Path

import numpy as np

from ...diffusion import sr_sample
from ...exceptions import DimensionError
from ...training import load_generator
from ...utils.image_io import from_model_range, image_suffix, read_image, to_model_range, write_image
from ..base import WSDTCommand, seed_type


class Command(WSDTCommand):
    help = "Super-resolve LR images with a trained checkpoint"

    def add_arguments(self, parser):
        parser.add_argument("inputs", nargs="+", help="LR images (PPM/PGM/PNG)")
        parser.add_argument("--checkpoint", required=True, help="Checkpoint written by train")
        parser.add_argument("--seed", type=seed_type, default=0, help="Sampling seed")
        parser.add_argument("--out", required=True, help="Output directory")

    def run(self, *args, **options):
        model, schedule, metadata = load_generator(options["checkpoint"])
        config = model.config
        self.stdout.write(
            f"Checkpoint at iteration {metadata.get('iteration', 0)}: "
            f"{config.lr_size}px -> {config.image_size}px, T={schedule.timesteps}"
        )

        lr_images = []
        for name in options["inputs"]:
            pixels = read_image(name)
            if pixels.shape != config.lr_shape:
                raise DimensionError(f"{name} is {pixels.shape}, the checkpoint expects LR images of {config.lr_shape}")
            lr_images.append((Path(name), pixels))

        out = self.output_dir(options["out"])
        for path, pixels in lr_images:
            # fresh stream per image
            rng = np.random.default_rng(options["seed"])
            sr = sr_sample(to_model_range(pixels), model, schedule, rng)
            target = out / f"{path.stem}{image_suffix(config.channels)}"
            write_image(target, from_model_range(sr))
            self.stdout.write(f"{path.name} -> {target}")

        self.stdout.write(self.style.SUCCESS(f">>> Super-resolved {len(lr_images)} image(s)"))
