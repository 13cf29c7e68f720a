import argparse
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import config
from database.models import Params, RunConfig
from utils.artifacts import ArtifactWriter
from utils.errors import ConfigError, Unclassifiable
from utils.params import validate

LOGGER = logging.getLogger(__name__)

Handler = Callable[['Context'], Dict[str, Any]]


@dataclass
class Command:
    name: str
    handler: Handler
    help: str
    arguments: Optional[Callable[[argparse.ArgumentParser], None]] = None
    needs_params: bool = True


class Router:
    """Groups related subcommands; a Dispatcher collects routers."""

    def __init__(self, name: str = ""):
        self.name = name
        self.commands: Dict[str, Command] = {}

    def command(self, name: str, help: str = "",
                arguments: Optional[Callable[[argparse.ArgumentParser], None]] = None,
                needs_params: bool = True):
        def register(handler: Handler) -> Handler:
            self.commands[name] = Command(name, handler, help, arguments, needs_params)
            return handler
        return register


@dataclass
class Context:
    """Everything a command handler needs: parsed flags, merged run config,
    validated parameters and the artifact writer."""
    args: argparse.Namespace
    run: Optional[RunConfig]
    writer: ArtifactWriter
    rtol: float = config.RTOL
    atol: float = config.ATOL
    workers: Optional[int] = None
    _params: Optional[Params] = field(default=None, repr=False)

    @property
    def params(self) -> Params:
        if self._params is None:
            if self.run is None or self.run.sigma is None:
                raise ConfigError("this command needs sigma")
            self._params = validate(self.run.m, self.run.p, self.run.sigma, self.run.N,
                                    self.run.tolerance.get('regime', config.REGIME_TOL))
        return self._params

    def option(self, name: str, default: Any = None) -> Any:
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if self.run is None:
            return default
        return self.run.options.get(name, default)

    def require_decided(self, undecided: bool, what: str) -> None:
        if undecided and self.args.strict:
            raise Unclassifiable(f"{what} is undecided")


def _load_run(args: argparse.Namespace, needs_params: bool = True) -> Optional[RunConfig]:
    data: Dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config file: {e}", path=args.config)
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object", path=args.config)
    for key in ('m', 'p', 'sigma', 'N'):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    if not needs_params and not data:
        return None
    return RunConfig.from_dict(data)


class Dispatcher:
    def __init__(self, prog: str = "blowup"):
        self.prog = prog
        self.routers: List[Router] = []

    def include_router(self, router: Router) -> None:
        self.routers.append(router)

    @property
    def commands(self) -> Dict[str, Command]:
        merged: Dict[str, Command] = {}
        for router in self.routers:
            merged.update(router.commands)
        return merged

    def build_parser(self) -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument('--config', help="JSON run file")
        common.add_argument('--m', type=float)
        common.add_argument('--p', type=float)
        common.add_argument('--sigma', type=float)
        common.add_argument('--N', type=int)
        common.add_argument('--rtol', type=float, default=None)
        common.add_argument('--atol', type=float, default=None)
        common.add_argument('--parallel', type=int, default=None, help="worker threads")
        common.add_argument('--log-level', default='INFO')
        common.add_argument('--output', default=None, help="output directory")
        common.add_argument('--seed', type=int, default=None)
        common.add_argument('--strict', action='store_true',
                            help="exit 4 when the headline fate is undecided")

        parser = argparse.ArgumentParser(prog=self.prog)
        sub = parser.add_subparsers(dest='command', required=True)
        for command in self.commands.values():
            child = sub.add_parser(command.name, help=command.help, parents=[common])
            if command.arguments is not None:
                command.arguments(child)
        return parser

    def context(self, args: argparse.Namespace, command: Command) -> Context:
        run = _load_run(args, command.needs_params)
        options = run.options if run is not None else {}
        tolerance = run.tolerance if run is not None else {}
        seed = args.seed if args.seed is not None else options.get('seed', config.DEFAULT_SEED)
        writer = ArtifactWriter(args.output or options.get('output'),
                                run.to_dict() if run is not None else {},
                                command=args.command, seed=seed)
        rtol = args.rtol or tolerance.get('rtol', config.RTOL)
        atol = args.atol or tolerance.get('atol', config.ATOL)
        workers = args.parallel or options.get('parallel')
        return Context(args, run, writer, rtol=rtol, atol=atol, workers=workers)

    def dispatch(self, args: argparse.Namespace) -> Dict[str, Any]:
        command = self.commands[args.command]
        LOGGER.info("running %s", command.name)
        return command.handler(self.context(args, command))
