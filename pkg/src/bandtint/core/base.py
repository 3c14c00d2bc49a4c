import copy
from abc import ABC, abstractmethod
from collections.abc import Iterator, Mapping, Sequence
from pathlib import Path
from typing import ClassVar, NamedTuple, Self

import numpy as np
from pydantic import TypeAdapter, ValidationError

from bandtint import models
from bandtint.core.snapshot import read_snapshot, write_snapshot
from bandtint.core.tensor import Tensor, default_dtype, init_uniform
from bandtint.errors import ShapeError, SnapshotError

PARAMS_FILE = 'params.btw'
ARCH_FILE = 'arch.json'
HEAD_PREFIX = 'head.'

_arch_adapter: TypeAdapter[models.NetworkArch] = TypeAdapter(models.NetworkArch)


class ParamSpec(NamedTuple):
    name: str
    shape: tuple[int, ...]
    fan_in: int
    """
    Zero for biases, which start at zero.
    """


def conv_spec(name: str, c_out: int, c_in: int, k: int = 3) -> Iterator[ParamSpec]:
    yield ParamSpec(f'{name}.weight', (c_out, c_in, k, k), c_in * k * k)
    yield ParamSpec(f'{name}.bias', (c_out,), 0)


class Network(ABC):
    """
    Named parameters plus a forward pass.

    Parameters are drawn in layout order from one seeded generator, so the same
    architecture and seed always produce the same weights.
    """

    kind: ClassVar[str]
    registry: ClassVar[dict[str, type['Network']]] = {}

    def __init_subclass__(cls, **kwargs: object) -> None:
        super().__init_subclass__(**kwargs)
        cls.registry[cls.kind] = cls

    def __init__(
        self,
        *,
        arch: models.NetworkArch,
        seed: int | Sequence[int] | None = None,
    ) -> None:
        self.arch = arch
        self.params: dict[str, Tensor] = {}

        rng = np.random.default_rng(seed)
        for spec in self.layout():
            if spec.fan_in:
                data = init_uniform(rng, spec.shape, spec.fan_in)
            else:
                data = np.zeros(spec.shape, dtype=default_dtype())
            self.params[spec.name] = Tensor.parameter(data, name=spec.name)

        if getattr(arch, 'identity_init', False):
            for name, param in self.params.items():
                if name.startswith(HEAD_PREFIX):
                    param.data[...] = 0

    @abstractmethod
    def layout(self) -> Iterator[ParamSpec]:
        """
        Every parameter in creation order.
        """

    @abstractmethod
    def forward(self, *inputs: Tensor) -> Tensor: ...

    def __call__(self, *inputs: Tensor) -> Tensor:
        return self.forward(*inputs)

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def requires_grad_(self, flag: bool) -> Self:
        for param in self.params.values():
            param.requires_grad = flag
            param.grad = None
        return self

    def state(self) -> dict[str, np.ndarray]:
        return {name: param.data.copy() for name, param in self.params.items()}

    def load_state(self, state: Mapping[str, np.ndarray]) -> Self:
        missing = self.params.keys() - state.keys()
        unknown = state.keys() - self.params.keys()
        if missing or unknown:
            raise SnapshotError(
                f'{self.kind} parameters mismatch: missing {sorted(missing)}, unknown {sorted(unknown)}'
            )
        for name, param in self.params.items():
            if state[name].shape != param.shape:
                raise ShapeError(f'{name}: expected shape {param.shape}, got {state[name].shape}')
            param.data = np.array(state[name], dtype=param.data.dtype)
        return self

    def zero_(self) -> Self:
        for param in self.params.values():
            param.data[...] = 0
        return self

    def clone(self) -> Self:
        twin = copy.copy(self)
        twin.params = {
            name: Tensor(param.data.copy(), requires_grad=param.requires_grad, name=name)
            for name, param in self.params.items()
        }
        return twin

    def save(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        write_snapshot(directory / PARAMS_FILE, self.state())
        (directory / ARCH_FILE).write_text(self.arch.model_dump_json(indent=2) + '\n')


def load_network(directory: Path) -> Network:
    """
    Rebuild a network from `arch.json` and restore `params.btw`.
    """
    arch_path = directory / ARCH_FILE
    try:
        arch = _arch_adapter.validate_json(arch_path.read_bytes())
    except OSError as e:
        raise SnapshotError(f'{arch_path}: {e.strerror}') from e
    except ValidationError as e:
        first = e.errors()[0]
        location = '.'.join(str(part) for part in first['loc']) or 'file'
        raise SnapshotError(f'{arch_path}: {location}: {first["msg"]}') from e
    network = Network.registry[arch.kind](arch=arch)
    return network.load_state(read_snapshot(directory / PARAMS_FILE))
