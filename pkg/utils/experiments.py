import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import config

LOGGER = logging.getLogger(__name__)


@dataclass
class Experiment:
    """A named parameter set behind one of the reproduced figures."""
    name: str
    m: float
    p: float
    N: int
    sigma: Optional[float] = None
    sources: List[str] = field(default_factory=list)
    bracket: Optional[List[float]] = None
    sigmas: List[float] = field(default_factory=list)
    description: str = ""

    @classmethod
    def from_dict(cls, name: str, data: Dict[str, Any]) -> 'Experiment':
        return cls(
            name=name,
            m=float(data['m']),
            p=float(data['p']),
            N=int(data['N']),
            sigma=data.get('sigma'),
            sources=list(data.get('sources', [])),
            bracket=data.get('bracket'),
            sigmas=[float(s) for s in data.get('sigmas', [])],
            description=data.get('description', ''),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'm': self.m,
            'p': self.p,
            'N': self.N,
            'sigma': self.sigma,
            'sources': self.sources,
            'bracket': self.bracket,
            'sigmas': self.sigmas,
            'description': self.description,
        }


class ExperimentManager:
    def __init__(self, data_file: str = config.EXPERIMENTS_FILE):
        self.data_file = Path(data_file)
        self._experiments = self._load_experiments()

    def _load_experiments(self) -> Dict[str, Experiment]:
        try:
            with open(self.data_file, 'r', encoding='utf-8') as f:
                data = json.load(f)
            return {name: Experiment.from_dict(name, entry) for name, entry in data.items()}
        except (FileNotFoundError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            LOGGER.error("could not load experiments from %s: %s", self.data_file, e)
            return {}

    def get_experiment(self, name: str) -> Optional[Experiment]:
        return self._experiments.get(name)

    def get_all_experiments(self) -> Dict[str, Experiment]:
        return self._experiments
