"""Selectable estimands and outcome models."""
from enum import Enum

from .errors import ValidationError


class Model(str, Enum):
    WITH_INTERACTION = "interaction"
    NO_INTERACTION = "no-interaction"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("_", "-"))
        except ValueError:
            raise ValidationError(f"unknown model {value!r}") from None


class Estimand(str, Enum):
    CLUSTER = "cluster"                    # conditional cluster-level effect
    CLUSTER_MARGINAL = "cluster-marginal"  # cluster effect at the individual allocation margin
    INDIVIDUAL = "individual"
    INTERACTION = "interaction"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("_", "-"))
        except ValueError:
            raise ValidationError(f"unknown effect {value!r}") from None


class Parametrisation(str, Enum):
    RAW = "raw"          # individual indicator coded 0/1
    CENTRED = "centred"  # individual indicator minus the allocation fraction

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


#: (model, estimand) rows reported in sample-size tables, in display order
TABLE_ROWS = (
    (Model.WITH_INTERACTION, Estimand.CLUSTER),
    (Model.WITH_INTERACTION, Estimand.INDIVIDUAL),
    (Model.WITH_INTERACTION, Estimand.INTERACTION),
    (Model.NO_INTERACTION, Estimand.CLUSTER),
    (Model.NO_INTERACTION, Estimand.INDIVIDUAL),
)
