"""
Freezing policy for task tuning.
"""

from typing import Dict, Iterable, List

from ..autodiff import ParameterGroup, parameter_checksum
from ..models.experiment import FreezePolicy
from ..utils.errors import LocovError
from ..utils.logger import train_logger


def apply_freeze_policy(groups: Iterable[ParameterGroup], policy: FreezePolicy, encoder_stages: int) -> List[str]:
    """Freeze the groups the policy names, unfreeze the rest; returns the frozen names."""
    groups = list(groups)
    frozen = set(policy.group_names(encoder_stages))
    names = {g.name for g in groups}
    missing = sorted(n for n in frozen if n not in names)
    if missing:
        raise LocovError("invalid-config", f"freeze policy names unknown groups {missing}")
    for group in groups:
        group.set_trainable(group.name not in frozen)
    train_logger.info("Applied freeze policy", frozen=sorted(frozen))
    return sorted(frozen)


def group_checksums(groups: Iterable[ParameterGroup]) -> Dict[str, str]:
    return {g.name: parameter_checksum(g) for g in groups}


__all__ = ['apply_freeze_policy', 'group_checksums']
