from ...exceptions import ConfigurationError
from ...utils.image_io import from_model_range, read_spectrum_sidecar, sidecar_stem, write_image
from ...wavelet import WaveletSpectrum, imdwt
from ..base import WSDTCommand


class Command(WSDTCommand):
    help = "Rebuild an image from the f32 spectrum sidecar written by `dwt`"

    def add_arguments(self, parser):
        parser.add_argument("sidecar", help="<stem>.spectrum.npz written by dwt")
        parser.add_argument("--out", required=True, help="Output directory")
        parser.add_argument("--force", action="store_true", help="Overwrite an existing output image")

    def run(self, *args, **options):
        packed, levels, suffix = read_spectrum_sidecar(options["sidecar"])
        image = imdwt(WaveletSpectrum(packed.astype("float64"), levels))

        out = self.output_dir(options["out"])
        target = out / f"{sidecar_stem(options['sidecar'])}{suffix}"
        if target.exists() and not options["force"]:
            raise ConfigurationError(f"{target} already exists; pass --force to overwrite it")
        write_image(target, from_model_range(image))
        self.stdout.write(self.style.SUCCESS(f">>> Wrote {target}"))
