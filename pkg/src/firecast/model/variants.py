from __future__ import annotations

from ..grid import Indicator

I = Indicator

# Humidity is carried by the dew-point channel.
VARIANT_CHANNELS = {
    "V1": (I.PM25, I.PM10, I.CO, I.NO2),
    "V2": (I.DEW_POINT, I.TEMPERATURE, I.PM25, I.CO),
    "V3": (I.WIND_SPEED, I.TEMPERATURE, I.DEW_POINT),
    "V4": (I.WIND_SPEED, I.TEMPERATURE, I.DEW_POINT, I.PM25, I.PM10, I.CO, I.NO2),
}

# Accuracies reported for the full California corpus; annotations only.
REFERENCE_ACCURACY = {"V1": 89.3, "V2": 92.8, "V3": 96.3, "V4": 97.1, "CNN": 76.4}


def variant_config(v: str) -> tuple[Indicator, ...]:
    """Input channels of ULSTM variant ``V1`` .. ``V4``."""
    try:
        return VARIANT_CHANNELS[v.upper()]
    except KeyError:
        raise ValueError(f"unknown variant {v!r}; expected one of {sorted(VARIANT_CHANNELS)}") from None
