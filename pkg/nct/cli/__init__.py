from nct.cli.checks import CheckReport, CheckResult, reduce_check
from nct.cli.document import RunDocument, load_config, parse_config
