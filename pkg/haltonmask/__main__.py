import click

from haltonmask.cli.commands import analysis_cli, schedule_cli

haltonmask = cli = click.CommandCollection(sources=[schedule_cli, analysis_cli])


if __name__ == "__main__":
    haltonmask()
