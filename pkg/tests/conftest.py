from __future__ import annotations

import pytest

from eknit.topology import (
    AttachmentSite,
    ChannelGroup,
    GarmentLayout,
    VerticalStrip,
    default_junctions,
    reference_layout,
)


@pytest.fixture(scope="session")
def ref_layout() -> GarmentLayout:
    return reference_layout()


@pytest.fixture
def single_group_layout() -> GarmentLayout:
    """One band, two sites 50 cm apart, no strips: exact resistances."""
    groups = (ChannelGroup("band", 100.0, 0.0, 80.0),)
    sites = (AttachmentSite("a", "band", 10.0),
             AttachmentSite("b", "band", 60.0))
    return GarmentLayout(groups, (), sites, ())


@pytest.fixture
def two_group_layout() -> GarmentLayout:
    """Two bands bridged by one strip; 12 junctions gate the crossing."""
    groups = (ChannelGroup("top", 100.0, 0.0, 50.0),
              ChannelGroup("bot", 80.0, 0.0, 50.0))
    strips = (VerticalStrip("s", 10.0, ("top", "bot")),)
    sites = (AttachmentSite("h", "top", 40.0),
             AttachmentSite("b", "bot", 25.0))
    return GarmentLayout(groups, strips, sites,
                         default_junctions(groups, strips))
