"""Bundled domain and instance files."""

from __future__ import annotations

from importlib import resources

DOMAINS = ("bw-ex", "bw-ex-s", "bw-all", "bw-all-s", "bw-rain", "lg-ex", "lg-ex-s", "lg-all", "lg-all-s")
# instance family and available sizes per domain family
FAMILIES = {"bw": (3, 4, 5), "lg": (2, 3)}


def _read(fname: str) -> str:
    return resources.files(__name__).joinpath(fname).read_text(encoding="utf-8")


def domain_text(name: str) -> str:
    if name not in DOMAINS:
        raise KeyError(f"no bundled domain {name!r}; choose from {', '.join(DOMAINS)}")
    return _read(f"{name}.dom")


def family_of(domain_name: str) -> str:
    return domain_name.split("-")[0]


def instance_text(family: str, size: int) -> str:
    if size not in FAMILIES.get(family, ()):
        raise KeyError(f"no bundled {family} instance of size {size}")
    return _read(f"{family}{size}.inst")


def load_domain(name: str):
    from ..domain import parse_domain

    return parse_domain(domain_text(name))


def load_instance(domain_name: str, size: int, domain=None):
    """Grounded ``Instance`` (states not yet enumerated) for a bundled size."""
    from ..domain import parse_instance
    from ..ground import Instance

    domain = domain or load_domain(domain_name)
    spec = parse_instance(instance_text(family_of(domain_name), size), domain)
    return Instance(domain, spec)
