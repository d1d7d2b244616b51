"""Topology description files.

Line-oriented, `#` comments. Hop lines appear in chain order (hop 1 first):

    host dev 192.168.0.2 position=0
    nat mapping=port_restricted ports=preserve pooling=paired pool=100.64.5.9 \
        udp_timeout=65 internal=192.168.0.0/16 hairpin=off
    router
    nat mapping=symmetric ports=random_chunk:4096 pooling=paired \
        pool=33.7.0.1,33.7.0.2 udp_timeout=35 internal=100.64.0.0/10
    server vantage 198.51.100.1 198.51.100.2
    seed 7
"""

from __future__ import annotations

from typing import Optional

from .config import HairpinMode, MappingType, NatConfig, Pooling, PortAllocation
from .engine import Nat, Router, Topology


def _parse_nat(args: list[str], where: str) -> NatConfig:
    fields: dict[str, str] = {}
    for arg in args:
        if "=" not in arg:
            raise ValueError(f"{where}: expected key=value, got {arg!r}")
        key, value = arg.split("=", 1)
        fields[key] = value
    try:
        ports = fields.pop("ports")
        if ":" in ports:
            ports, chunk = ports.split(":", 1)
            chunk_size: Optional[int] = int(chunk)
        else:
            chunk_size = None
        kwargs = dict(
            mapping_type=MappingType(fields.pop("mapping")),
            port_alloc=PortAllocation(ports),
            pooling=Pooling(fields.pop("pooling")),
            external_pool=tuple(fields.pop("pool").split(",")),
            chunk_size=chunk_size,
        )
        if "udp_timeout" in fields:
            kwargs["udp_timeout"] = float(fields.pop("udp_timeout"))
        if "tcp_timeout" in fields:
            kwargs["tcp_timeout"] = float(fields.pop("tcp_timeout"))
        if "hairpin" in fields:
            kwargs["hairpin"] = HairpinMode(fields.pop("hairpin"))
        if "internal" in fields:
            kwargs["internal_range"] = fields.pop("internal")
    except KeyError as exc:
        raise ValueError(f"{where}: missing nat field {exc}") from None
    if fields:
        raise ValueError(f"{where}: unknown nat fields {sorted(fields)}")
    return NatConfig(**kwargs)


def load_topology(path) -> Topology:
    """Parse a topology file into a ready-to-use Topology."""
    hops: list = []
    hosts: list[tuple[str, str, tuple[str, ...], int]] = []
    server: Optional[tuple[str, tuple[str, ...]]] = None
    seed = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            parts = line.split()
            kind, args = parts[0], parts[1:]
            if kind == "router":
                hops.append(Router())
            elif kind == "nat":
                hops.append(Nat(_parse_nat(args, where)))
            elif kind == "host":
                if len(args) < 2:
                    raise ValueError(f"{where}: host needs a name and address")
                name = args[0]
                position = 0
                addrs = []
                for arg in args[1:]:
                    if arg.startswith("position="):
                        position = int(arg.split("=", 1)[1])
                    else:
                        addrs.append(arg)
                hosts.append((where, name, tuple(addrs), position))
            elif kind == "server":
                if len(args) < 2:
                    raise ValueError(f"{where}: server needs a name and address")
                server = (args[0], tuple(args[1:]))
            elif kind == "seed":
                seed = int(args[0])
            else:
                raise ValueError(f"{where}: unknown directive {kind!r}")
    topo = Topology(hops, seed=seed)
    for where, name, addrs, position in hosts:
        try:
            topo.add_host(name, addrs, position=position)
        except ValueError as exc:
            raise ValueError(f"{where}: {exc}") from None
    if server is not None:
        topo.add_server(server[0], server[1])
    return topo
