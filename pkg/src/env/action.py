from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from src.exceptions import InvalidActionError
from src.grid.model import GridSpec
from src.grid.topology import BUS_1, BUS_2


@dataclass(frozen=True)
class Action:
    """Target bus configuration for one substation, or the do-nothing action."""

    substation: Optional[int] = None
    buses: Tuple[int, ...] = ()

    @property
    def is_do_nothing(self) -> bool:
        return self.substation is None

    @classmethod
    def for_substation(cls, spec: GridSpec, substation: int, buses: Sequence[int]) -> "Action":
        """Build a canonical, isolation-safe configuration or raise InvalidActionError."""
        buses = tuple(int(b) for b in buses)
        validate_configuration(spec, substation, buses)
        if buses[0] != BUS_1:
            raise InvalidActionError(f"substation {substation}: first element must stay on bus 1, got {buses}")
        if not is_isolation_safe(spec, substation, buses):
            raise InvalidActionError(f"substation {substation}: {buses} leaves an injection on a bus without lines")
        return cls(substation=substation, buses=buses)

    def __str__(self) -> str:
        if self.is_do_nothing:
            return "do-nothing"
        return f"sub{self.substation}:{''.join(str(b) for b in self.buses)}"


DO_NOTHING = Action()


def validate_configuration(spec: GridSpec, substation: int, buses: Sequence[int]) -> None:
    if not 0 <= substation < spec.n_substations:
        raise InvalidActionError(f"unknown substation {substation}")
    size = spec.substation_size(substation)
    if len(buses) != size:
        raise InvalidActionError(f"substation {substation} has {size} elements, configuration has {len(buses)}")
    if any(b not in (BUS_1, BUS_2) for b in buses):
        raise InvalidActionError(f"bus values must be 1 or 2, got {tuple(buses)}")


def is_isolation_safe(spec: GridSpec, substation: int, buses: Sequence[int]) -> bool:
    """No generator or load may sit on a bus that carries no line endpoint."""
    slots = spec.elements_at(substation)
    for bus in (BUS_1, BUS_2):
        on_bus = [slot for slot, b in zip(slots, buses) if b == bus]
        has_injection = any(not slot.kind.is_line for slot in on_bus)
        has_line = any(slot.kind.is_line for slot in on_bus)
        if has_injection and not has_line:
            return False
    return True
