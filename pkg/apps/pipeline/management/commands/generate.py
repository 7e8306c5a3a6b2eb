from apps.pipeline.stages import run_generate
from main.utils.generic_command import GenericCommand


class Command(GenericCommand):
    help = "Generate a synthetic interaction corpus, or ingest one with --interactions."
    stage = "generate"

    def add_stage_arguments(self, parser):
        parser.add_argument(
            "--interactions", default=None, help="CSV user_id,item_id,timestamp to ingest"
        )

    def run(self, config, workspace, options):
        return run_generate(config, workspace, options.get("interactions"))
