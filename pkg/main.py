import logging
import sys
from typing import List, Optional

import config
from handlers import analysis, certificates, profiles, repro, shooting
from handlers.router import Dispatcher
from utils.artifacts import dumps
from utils.errors import BlowupError

LOGGER = logging.getLogger(__name__)


def build_dispatcher() -> Dispatcher:
    dp = Dispatcher(prog="blowup")
    dp.include_router(analysis.router)
    dp.include_router(shooting.router)
    dp.include_router(profiles.router)
    dp.include_router(certificates.router)
    dp.include_router(repro.router)
    return dp


def main(argv: Optional[List[str]] = None) -> int:
    dp = build_dispatcher()
    args = dp.build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format=config.LOG_FORMAT)
    try:
        payload = dp.dispatch(args)
    except BlowupError as e:
        LOGGER.error("%s: %s", type(e).__name__, e.message)
        print(dumps(e.to_dict()))
        return e.exit_code
    print(dumps(payload))
    return 0


if __name__ == "__main__":
    sys.exit(main())
