"""Randomized property checks for the simulator.

Each property runs over at least 1000 seeded random cases. Plain seeded
generators are used instead of a fuzzing framework so failures reproduce
exactly from the printed seed.
"""

import random

import pytest

from cgnscope.natsim import (
    DeliveryVerdict,
    Endpoint,
    MappingType,
    Nat,
    NatConfig,
    Packet,
    Pooling,
    PortAllocation,
    Proto,
    Router,
    Topology,
)

SERVER = Endpoint("198.51.100.1", 9000)
CASES = 1000


def random_config(rng, **overrides):
    port_alloc = overrides.pop(
        "port_alloc", rng.choice(list(PortAllocation))
    )
    chunk_size = None
    if port_alloc is PortAllocation.RANDOM_CHUNK:
        chunk_size = rng.choice([64, 512, 1024, 4096, 16384])
    cfg = dict(
        mapping_type=rng.choice(list(MappingType)),
        port_alloc=port_alloc,
        pooling=rng.choice(list(Pooling)),
        external_pool=tuple(f"33.0.{rng.randint(0, 200)}.{i}" for i in range(1, rng.randint(2, 9))),
        udp_timeout=float(rng.randint(10, 200)),
        internal_range="10.0.0.0/8",
        chunk_size=chunk_size,
    )
    cfg.update(overrides)
    return NatConfig(**cfg)


def build(rng, **overrides):
    topo = Topology([Nat(random_config(rng, **overrides))], seed=rng.randint(0, 2**32))
    hosts = rng.randint(1, 5)
    for i in range(hosts):
        topo.add_host(f"h{i}", f"10.0.{rng.randint(0, 50)}.{i + 2}", position=0)
    topo.add_server("server", SERVER.ip)
    return topo, hosts


def test_paired_pooling_is_functional():
    rng = random.Random(0xA11CE)
    for case in range(CASES):
        topo, hosts = build(rng, pooling=Pooling.PAIRED)
        assignments: dict[str, str] = {}
        for _ in range(rng.randint(2, 8)):
            i = rng.randrange(hosts)
            host = topo.hosts[f"h{i}"]
            src = Endpoint(host.addresses[0], rng.randint(1024, 60000))
            out = topo.send(f"h{i}", Packet(Proto.UDP, src, SERVER))
            assert out.delivered, f"case {case}"
            prev = assignments.setdefault(src.ip, out.packet.src.ip)
            assert prev == out.packet.src.ip, f"case {case}: paired pooling broke"


def test_strict_expiry_boundary():
    rng = random.Random(0xE59)
    for case in range(CASES):
        timeout = float(rng.randint(5, 120))
        topo, _ = build(rng, udp_timeout=timeout)
        host = topo.hosts["h0"]
        src = Endpoint(host.addresses[0], rng.randint(1024, 60000))
        topo.send("h0", Packet(Proto.UDP, src, SERVER), at=0.0)
        nat = topo.nat_at(1)
        live_before = len(nat.mappings)
        # exactly at the timeout the entry must survive
        assert topo.expire(timeout) == 0, f"case {case}"
        assert len(nat.mappings) == live_before
        # any instant past it, the entry must be gone
        past = timeout + rng.choice([0.001, 0.5, 1.0, 10.0])
        assert topo.expire(past) == live_before, f"case {case}"
        assert nat.mappings == {}


def test_full_cone_and_restricted_filtering():
    rng = random.Random(0xF117E4)
    for case in range(CASES):
        mt = rng.choice(list(MappingType))
        topo, _ = build(rng, mapping_type=mt)
        host = topo.hosts["h0"]
        src = Endpoint(host.addresses[0], rng.randint(1024, 60000))
        out = topo.send("h0", Packet(Proto.UDP, src, SERVER), at=0.0)
        ext = out.packet.src
        remotes = {
            "contacted": SERVER,
            "same_ip_other_port": Endpoint(SERVER.ip, SERVER.port + rng.randint(1, 99)),
            "other_ip": Endpoint(f"203.0.113.{rng.randint(1, 250)}", rng.randint(1024, 60000)),
        }
        expectations = {
            MappingType.FULL_CONE: {"contacted": True, "same_ip_other_port": True, "other_ip": True},
            MappingType.ADDRESS_RESTRICTED: {"contacted": True, "same_ip_other_port": True, "other_ip": False},
            MappingType.PORT_RESTRICTED: {"contacted": True, "same_ip_other_port": False, "other_ip": False},
            MappingType.SYMMETRIC: {"contacted": True, "same_ip_other_port": False, "other_ip": False},
        }[mt]
        for name, remote in remotes.items():
            res = topo.send("server", Packet(Proto.UDP, remote, ext), at=1.0)
            assert res.delivered == expectations[name], (
                f"case {case}: {mt} inbound from {name} -> {res.verdict}"
            )


def test_chunk_confinement():
    rng = random.Random(0xC4B)
    for case in range(CASES):
        chunk = rng.choice([64, 512, 1024, 4096, 16384])
        topo, hosts = build(
            rng, port_alloc=PortAllocation.RANDOM_CHUNK, chunk_size=chunk
        )
        nat = topo.nat_at(1)
        for _ in range(rng.randint(2, 10)):
            i = rng.randrange(hosts)
            host = topo.hosts[f"h{i}"]
            src = Endpoint(host.addresses[0], rng.randint(1024, 60000))
            out = topo.send(f"h{i}", Packet(Proto.UDP, src, SERVER))
            base = nat.chunk_base(src.ip)
            port = out.packet.src.port
            assert base % chunk == 0 and base >= 1024
            assert base <= port < base + chunk, f"case {case}: port {port} outside chunk"


def test_determinism_two_runs_byte_identical():
    rng = random.Random(0xDE7)
    for case in range(CASES):
        seed = rng.randint(0, 2**32)
        config_seed = rng.randint(0, 2**32)
        events = []
        evt_rng = random.Random(seed ^ 0x5A5A)
        t = 0.0
        for _ in range(evt_rng.randint(2, 8)):
            t += evt_rng.random() * 20
            events.append((t, evt_rng.randint(0, 2), evt_rng.randint(1024, 60000)))

        def run():
            r = random.Random(config_seed)
            topo = Topology([Nat(random_config(r))], seed=seed, trace=True)
            for i in range(3):
                topo.add_host(f"h{i}", f"10.0.0.{i + 2}", position=0)
            topo.add_server("server", SERVER.ip)
            for at, host_idx, port in events:
                host = topo.hosts[f"h{host_idx}"]
                src = Endpoint(host.addresses[0], port)
                topo.send(f"h{host_idx}", Packet(Proto.UDP, src, SERVER), at=at)
            return "\n".join(topo.trace)

        assert run() == run(), f"case {case}: traces diverged"


def test_no_send_matches_expired_mapping():
    # expiry at time t precedes any send at time >= t
    rng = random.Random(0x0DD)
    for case in range(CASES):
        timeout = float(rng.randint(5, 60))
        topo, _ = build(rng, udp_timeout=timeout, mapping_type=MappingType.FULL_CONE)
        host = topo.hosts["h0"]
        src = Endpoint(host.addresses[0], rng.randint(1024, 60000))
        out = topo.send("h0", Packet(Proto.UDP, src, SERVER), at=0.0)
        ext = out.packet.src
        late = timeout + rng.choice([0.01, 1.0, 25.0])
        res = topo.send("server", Packet(Proto.UDP, SERVER, ext), at=late)
        assert res.verdict is DeliveryVerdict.DROPPED_NO_ROUTE, f"case {case}"


def test_ttl_decrements_exactly_once_per_hop():
    rng = random.Random(0x771)
    for case in range(CASES):
        n_routers = rng.randint(0, 6)
        hops = [Router() for _ in range(n_routers)]
        nat_pos = rng.randint(0, n_routers)
        hops.insert(nat_pos, Nat(random_config(rng)))
        topo = Topology(hops, seed=rng.randint(0, 2**32))
        topo.add_host("c", "10.0.0.2", position=0)
        topo.add_server("server", SERVER.ip)
        n = len(hops)
        src = Endpoint("10.0.0.2", rng.randint(1024, 60000))
        short = topo.send("c", Packet(Proto.UDP, src, SERVER, ttl=n))
        assert short.verdict is DeliveryVerdict.DROPPED_TTL and short.hop == n
        ok = topo.send("c", Packet(Proto.UDP, src, SERVER, ttl=n + 1))
        assert ok.delivered and ok.packet.ttl == 1, f"case {case}"
