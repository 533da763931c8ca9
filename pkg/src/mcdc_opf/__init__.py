"""Multi-conductor hybrid AC/DC optimal power flow."""

from .network import (Configuration, DcTerminal, Grounding, Network, NetworkError, NotBalanceable,
                      Pole, check, derive_balanced_equivalent, pole_outage, single_conductor_view,
                      validate)

__version__ = "0.1.0"

__all__ = ["Configuration", "DcTerminal", "Grounding", "Network", "NetworkError",
           "NotBalanceable", "Pole", "check", "derive_balanced_equivalent", "pole_outage",
           "single_conductor_view", "validate"]
