from .main import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, bench, build_parser, compare_table, main, parse_seeds, rank
