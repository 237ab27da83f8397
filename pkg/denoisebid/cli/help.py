descr = 'Shows the denoisebid commands or the options of one command'
example = """
examples:
    denoisebid help
    denoisebid help sweep
"""


def configure_parser(sub_parsers):
    from argparse import RawDescriptionHelpFormatter

    p = sub_parsers.add_parser(
        'help', description=descr, help=descr, epilog=example,
        formatter_class=RawDescriptionHelpFormatter
        )
    p.add_argument(
        'command', metavar='COMMAND', nargs='?', default=None,
        help='command to describe (same as: denoisebid COMMAND -h)'
        )
    p.set_defaults(func=execute)


def _commands(parser):
    import argparse

    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


def execute(args, parser):
    if args.command is None:
        parser.print_help()
        return
    commands = _commands(parser)
    if args.command not in commands:
        parser.error("unknown command '%s'; choose from %s"
                     % (args.command, ', '.join(sorted(commands))))
    commands[args.command].print_help()
