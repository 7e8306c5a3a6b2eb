from apps.pipeline.ablation import run_ablation
from apps.pipeline.config import SWEEPS
from main.utils.generic_command import GenericCommand


class Command(GenericCommand):
    help = "Run an ablation sweep and write its comparison table."
    stage = "ablate"
    upstream = ["retrieve"]

    def add_stage_arguments(self, parser):
        parser.add_argument("--sweep", choices=SWEEPS, required=True)

    def run(self, config, workspace, options):
        result = run_ablation(config, options["sweep"], workspace, verbose=self.verbose)
        self.stdout.write(result.table.to_string(index=False))
        return {"sweep": options["sweep"], "settings": len(result.table)}
