from dataclasses import replace

from ...serializers import load_run_config
from ...training import generate_synth
from ...utils.image_io import from_model_range, image_suffix, write_image
from ..base import WSDTCommand, seed_type


class Command(WSDTCommand):
    help = "Write the synthetic HR/LR pairs described by a run configuration"

    def add_arguments(self, parser):
        parser.add_argument("--config", required=True, help="Run configuration (JSON)")
        parser.add_argument("--out", required=True, help="Output directory; receives hr/ and lr/")
        parser.add_argument("--seed", type=seed_type, default=None, help="Override data.seed")

    def run(self, *args, **options):
        run_config = load_run_config(options["config"])
        spec = run_config.data
        if options["seed"] is not None:
            spec = replace(spec, seed=options["seed"])

        out = self.output_dir(options["out"])
        suffix = image_suffix(spec.channels)
        pairs = generate_synth(spec)
        for index, (hr, lr) in enumerate(pairs):
            write_image(out / "hr" / f"{index:04d}{suffix}", from_model_range(hr))
            write_image(out / "lr" / f"{index:04d}{suffix}", from_model_range(lr))

        self.stdout.write(
            f"{len(pairs)} pairs, HR {spec.image_size}px, scale {spec.scale}, degradation {spec.degradation}"
        )
        self.stdout.write(self.style.SUCCESS(f">>> Wrote {out / 'hr'} and {out / 'lr'}"))
