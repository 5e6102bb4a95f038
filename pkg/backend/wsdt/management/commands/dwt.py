from pathlib import Path

from ...utils.image_io import (
    SIDECAR_SUFFIX,
    image_suffix,
    read_image,
    to_model_range,
    write_image,
    write_spectrum_sidecar,
)
from ...wavelet import mdwt, visualize_spectrum
from ..base import WSDTCommand


class Command(WSDTCommand):
    help = "Decompose an image into its packed J-level Haar spectrum (visualization + exact f32 sidecar)"

    def add_arguments(self, parser):
        parser.add_argument("input", help="PPM (P6), PGM (P5) or PNG image")
        parser.add_argument("--levels", type=int, default=1, help="Number of wavelet levels J")
        parser.add_argument("--out", required=True, help="Output directory")

    def run(self, *args, **options):
        source = Path(options["input"])
        pixels = read_image(source)
        spectrum = mdwt(to_model_range(pixels).astype("float64"), options["levels"])

        out = self.output_dir(options["out"])
        picture = out / f"{source.stem}.spectrum{image_suffix(spectrum.channels)}"
        write_image(picture, visualize_spectrum(spectrum))
        sidecar = out / f"{source.stem}{SIDECAR_SUFFIX}"
        write_spectrum_sidecar(sidecar, spectrum, source.suffix.lower())

        self.stdout.write(f"{source.name}: {spectrum.height}x{spectrum.width}x{spectrum.channels}, J={spectrum.levels}")
        self.stdout.write(self.style.SUCCESS(f">>> Wrote {picture} and {sidecar}"))
