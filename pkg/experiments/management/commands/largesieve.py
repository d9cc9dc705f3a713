from django.core.management.base import BaseCommand, CommandError

from core.exceptions import ConfigError
from experiments.services import (
    EXIT_CONFIG,
    EXIT_PASSED,
    SUBCOMMANDS,
    ExperimentConfig,
    ExperimentService,
    read_config_file,
)

FLAG_FIELDS = {
    "d": "d",
    "x": "x",
    "b": "b_exponent",
    "chars": "characters",
    "coeffs": "coefficients",
    "trials": "trials",
    "seed": "seed",
    "c": "c_override",
    "sigma_max": "sigma_max",
    "out": "output",
    "format": "format",
}


class Command(BaseCommand):
    help = "Run a large-sieve experiment and write its report."

    def add_arguments(self, parser):
        parser.add_argument("subcommand", choices=sorted(SUBCOMMANDS))
        parser.add_argument("--config", help="key=value file; flags override it")
        parser.add_argument("--d", type=int)
        parser.add_argument("--x", type=int)
        parser.add_argument("--b", type=float)
        parser.add_argument("--chars", help="all, non-principal or a comma separated index list")
        parser.add_argument("--coeffs", help="ones, random-complex, random-real or a 'p re im' file")
        parser.add_argument("--trials", type=int)
        parser.add_argument("--seed", type=int)
        parser.add_argument("--c", type=float)
        parser.add_argument("--sigma-max", type=float)
        parser.add_argument("--out")
        parser.add_argument("--format", choices=["json", "csv"])
        parser.add_argument("--record-threshold", action="store_true", default=None)
        parser.add_argument("--no-record", action="store_true", help="skip the run record in the database")

    def handle(self, *args, **options):
        name = options["subcommand"]
        try:
            values = read_config_file(options["config"]) if options.get("config") else {}
            for flag, field_name in FLAG_FIELDS.items():
                if options.get(flag) is not None:
                    values[field_name] = options[flag]
            if options.get("record_threshold"):
                values["record_threshold"] = True
            config = ExperimentConfig.from_mapping(values)
        except ConfigError as exc:
            raise CommandError(f"{name}: {exc}", returncode=EXIT_CONFIG)

        service = ExperimentService(record=False if options.get("no_record") else None)
        outcome = service.run(name, config, stream=self.stdout)
        if outcome.exit_code != EXIT_PASSED:
            raise CommandError(f"{name}: {outcome.message}", returncode=outcome.exit_code)
        if config.output:
            self.stderr.write(self.style.SUCCESS(f"{name}: passed, report written to {config.output}"))
