from dataclasses import replace
import logging

from ...exceptions import ConfigurationError
from ...serializers import load_run_config
from ...training import Trainer, generate_synth
from ..base import WSDTCommand, seed_type

logger = logging.getLogger(__name__)


class Command(WSDTCommand):
    help = "Train the WSDT denoiser and its discriminator on synthetic pairs"

    def add_arguments(self, parser):
        parser.add_argument("--config", required=True, help="Run configuration (JSON)")
        parser.add_argument("--out", required=True, help="Directory for train_log.jsonl and checkpoints")
        parser.add_argument("--seed", type=seed_type, default=None, help="Override train.seed")
        parser.add_argument("--checkpoint", default=None, help="Resume from this checkpoint")

    def run(self, *args, **options):
        run_config = load_run_config(options["config"])
        train_config = run_config.train
        if options["seed"] is not None:
            train_config = replace(train_config, seed=options["seed"])

        out = self.output_dir(options["out"])
        dataset = generate_synth(run_config.data)
        if options["checkpoint"]:
            trainer = Trainer.from_checkpoint(options["checkpoint"], dataset=dataset, train_config=train_config)
            if trainer.model_config != run_config.model:
                raise ConfigurationError(
                    f"checkpoint geometry {trainer.model_config.to_dict()} does not match "
                    f"the configured model {run_config.model.to_dict()}"
                )
            if trainer.schedule != run_config.schedule:
                raise ConfigurationError("checkpoint noise schedule does not match the run configuration")
            self.stdout.write(f"Resuming from iteration {trainer.iteration}")
        else:
            trainer = Trainer(run_config.model, run_config.schedule, train_config, dataset)

        logger.info(
            f"Training {trainer.generator.num_parameters()} generator parameters "
            f"for {train_config.iterations} iterations"
        )
        history = trainer.fit(out_dir=out)

        if history:
            last = history[-1]
            self.stdout.write(
                f"iteration={last['iteration']} loss_d={last['loss_d']:.6f} "
                f"loss_g={last['loss_g']:.6f} loss_pixel={last['loss_pixel']:.6f}"
            )
        self.stdout.write(self.style.SUCCESS(f">>> Trained to iteration {trainer.iteration}; checkpoint {out / 'latest.wsdt'}"))
