"""Forward simulator: ground-truth branch currents plus measurement corruption.

All currents are phasors held as complex numbers (amperes), serialized as
``[re, im]`` pairs. Branch current sign follows the canonical orientation of
:mod:`dnti.netmodel`: positive means flow from ``from_node`` to ``to_node``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .netmodel import SUBSTATION, Network, NetworkError, Topology, path_to_substation


class ScenarioError(ValueError):
    """Raised for scenario files violating the scenario invariants."""


@dataclass(frozen=True)
class HarmonicSource:
    node: int
    order: int
    current: complex

    def __post_init__(self):
        if self.node == SUBSTATION:
            raise ScenarioError("harmonic source cannot sit at the substation")
        if self.order < 2:
            raise ScenarioError(f"harmonic order must be >= 2, got {self.order}")
        if abs(self.current) <= 0.0:
            raise ScenarioError(f"harmonic source at node {self.node} has zero current")


@dataclass(frozen=True)
class NoiseSpec:
    pmu_fundamental_tve_pct: float = 0.0
    pmu_harmonic_tve_pct: float = 0.0
    source_meter_tve_pct: float = 0.0
    pseudo_error_pct: float = 0.0

    def __post_init__(self):
        for name, val in self.__dict__.items():
            if not 0.0 <= val <= 100.0:
                raise ScenarioError(f"{name}={val} outside [0, 100]")


@dataclass(frozen=True)
class ScenarioConfig:
    topology: Topology
    fundamental_injections: dict
    harmonic_sources: tuple
    noise: NoiseSpec = NoiseSpec()
    seed: int = 0


@dataclass(frozen=True)
class MeasurementSet:
    """One snapshot of sensor data.

    ``fundamental_branch`` and ``harmonic_branch`` are restricted to PMU
    branches; ``harmonic_branch`` is keyed by ``(branch_id, order)``. The
    noise spec the measurements were produced with travels along so model
    builders can reason about error bounds.
    """

    fundamental_branch: dict
    harmonic_branch: dict
    harmonic_source_meas: tuple
    pseudo_injections: dict
    noise: NoiseSpec = NoiseSpec()


def validate_scenario(net: Network, sc: ScenarioConfig) -> None:
    from .netmodel import validate_radial

    if not validate_radial(net, sc.topology):
        raise ScenarioError("scenario topology is not radial-valid")
    missing = [n for n in net.nodes if n != SUBSTATION and n not in sc.fundamental_injections]
    if missing:
        raise ScenarioError(f"fundamental injections missing for nodes {missing}")
    for src in sc.harmonic_sources:
        if src.node not in net.nodes:
            raise ScenarioError(f"harmonic source at unknown node {src.node}")


def _tree_structure(net: Network, topo: Topology):
    """Parent pointers and a depth-ordered node list for the closed tree."""
    closed = topo.closed_ids()
    parent = {SUBSTATION: None}
    order = [SUBSTATION]
    frontier = [SUBSTATION]
    while frontier:
        nxt = []
        for cur in frontier:
            for br in net.incident(cur):
                if br.id not in closed:
                    continue
                peer = br.other(cur)
                if peer not in parent:
                    parent[peer] = (cur, br)
                    order.append(peer)
                    nxt.append(peer)
        frontier = nxt
    if len(order) != net.n_nodes:
        raise NetworkError("topology is not radial-valid: unreachable nodes")
    return parent, order


def simulate_fundamental(net: Network, topo: Topology, injections: dict) -> dict:
    """Branch fundamental currents by leaf-to-root accumulation.

    Every non-substation node's injection flows along its tree path to the
    substation; open branches carry exactly zero.
    """
    parent, order = _tree_structure(net, topo)
    subtree = {node: complex(injections.get(node, 0.0)) for node in net.nodes}
    currents = {br.id: 0j for br in net.branches}
    for node in reversed(order):
        if node == SUBSTATION:
            continue
        up, br = parent[node]
        flow = subtree[node]  # toward the substation, i.e. node -> up
        currents[br.id] = flow if br.from_node == node else -flow
        subtree[up] += flow
    return currents


def simulate_harmonic(net: Network, topo: Topology, sources) -> dict:
    """Branch harmonic currents: per order, the phasor sum of all sources
    whose substation path crosses the branch."""
    orders = sorted({src.order for src in sources})
    currents = {(br.id, h): 0j for br in net.branches for h in orders}
    for src in sources:
        path = path_to_substation(net, topo, src.node)
        cur = src.node
        for bid in path:
            br = net.branch(bid)
            sign = 1.0 if br.from_node == cur else -1.0
            currents[(bid, src.order)] += sign * src.current
            cur = br.other(cur)
    return currents


def apply_tve_noise(true_value: complex, tve_pct: float, rng) -> complex:
    """Perturb a phasor with truncated complex Gaussian noise.

    Per-component sigma is ``tve/100 * |value| / (3*sqrt(2))`` so the 3-sigma
    error magnitude sits at the TVE bound; draws beyond the bound are
    rejected, making the stated TVE a hard cap.
    """
    if tve_pct < 0:
        raise ValueError("tve_pct must be >= 0")
    mag = abs(true_value)
    if tve_pct == 0.0 or mag == 0.0:
        return true_value
    bound = tve_pct / 100.0 * mag
    sigma = bound / (3.0 * math.sqrt(2.0))
    while True:
        e_re, e_im = rng.normal(0.0, sigma, size=2)
        if math.hypot(e_re, e_im) <= bound:
            return true_value + complex(e_re, e_im)


def apply_pseudo_error(true_injection: complex, err_pct: float, rng) -> complex:
    """Load-curve pseudo-measurement error: each component scaled by (1 + d)
    with d ~ N(0, (err/300)^2) truncated to |d| <= err/100."""
    if not 0.0 <= err_pct <= 100.0:
        raise ValueError("err_pct must be in [0, 100]")
    if err_pct == 0.0:
        return true_injection
    sigma = err_pct / 300.0
    cap = err_pct / 100.0

    def draw():
        while True:
            d = rng.normal(0.0, sigma)
            if abs(d) <= cap:
                return d

    return complex(true_injection.real * (1.0 + draw()), true_injection.imag * (1.0 + draw()))


def make_measurements(net: Network, sc: ScenarioConfig) -> MeasurementSet:
    """Simulate ground truth and corrupt it per the scenario's noise spec.

    Deterministic for a given scenario seed; corruption order is fixed
    (fundamental PMUs, harmonic PMUs, source meters, pseudo injections).
    """
    validate_scenario(net, sc)
    rng = np.random.default_rng(sc.seed)
    fund = simulate_fundamental(net, sc.topology, sc.fundamental_injections)
    harm = simulate_harmonic(net, sc.topology, sc.harmonic_sources)
    pmus = sorted(net.pmu_branches)
    orders = sorted({src.order for src in sc.harmonic_sources})

    fundamental_branch = {
        bid: apply_tve_noise(fund[bid], sc.noise.pmu_fundamental_tve_pct, rng) for bid in pmus
    }
    harmonic_branch = {
        (bid, h): apply_tve_noise(harm[(bid, h)], sc.noise.pmu_harmonic_tve_pct, rng)
        for bid in pmus
        for h in orders
    }
    source_meas = tuple(
        HarmonicSource(
            src.node, src.order, apply_tve_noise(src.current, sc.noise.source_meter_tve_pct, rng)
        )
        for src in sc.harmonic_sources
    )
    pseudo = {
        node: apply_pseudo_error(
            complex(sc.fundamental_injections[node]), sc.noise.pseudo_error_pct, rng
        )
        for node in sorted(sc.fundamental_injections)
        if node != SUBSTATION
    }
    return MeasurementSet(
        fundamental_branch=fundamental_branch,
        harmonic_branch=harmonic_branch,
        harmonic_source_meas=source_meas,
        pseudo_injections=pseudo,
        noise=sc.noise,
    )


# ---------------------------------------------------------------------------
# JSON round trips


def _phasor(pair) -> complex:
    return complex(float(pair[0]), float(pair[1]))


def _pair(value: complex):
    return [value.real, value.imag]


def scenario_from_json(text: str, net: Network) -> ScenarioConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario parse error at line {exc.lineno}: {exc.msg}") from exc
    try:
        topo = Topology.from_open_branches(net, raw.get("topology", []))
        injections = {int(k): _phasor(v) for k, v in raw["injections"].items()}
        sources = tuple(
            HarmonicSource(int(s["node"]), int(s["h"]), complex(float(s["re"]), float(s["im"])))
            for s in raw.get("sources", [])
        )
        nz = raw.get("noise", {})
        noise = NoiseSpec(
            pmu_fundamental_tve_pct=float(nz.get("pmu_f_tve", 0.0)),
            pmu_harmonic_tve_pct=float(nz.get("pmu_h_tve", 0.0)),
            source_meter_tve_pct=float(nz.get("src_tve", 0.0)),
            pseudo_error_pct=float(nz.get("pseudo_pct", 0.0)),
        )
        seed = int(raw.get("seed", 0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario field: {exc}") from exc
    sc = ScenarioConfig(topo, injections, sources, noise, seed)
    validate_scenario(net, sc)
    return sc


def measurements_to_json(meas: MeasurementSet) -> str:
    doc = {
        "fundamental_branch": {str(b): _pair(v) for b, v in sorted(meas.fundamental_branch.items())},
        "harmonic_branch": {
            f"{b}@{h}": _pair(v) for (b, h), v in sorted(meas.harmonic_branch.items())
        },
        "harmonic_source_meas": [
            {"node": s.node, "h": s.order, "re": s.current.real, "im": s.current.imag}
            for s in meas.harmonic_source_meas
        ],
        "pseudo_injections": {str(n): _pair(v) for n, v in sorted(meas.pseudo_injections.items())},
        "noise": {
            "pmu_f_tve": meas.noise.pmu_fundamental_tve_pct,
            "pmu_h_tve": meas.noise.pmu_harmonic_tve_pct,
            "src_tve": meas.noise.source_meter_tve_pct,
            "pseudo_pct": meas.noise.pseudo_error_pct,
        },
    }
    return json.dumps(doc, indent=1)


def measurements_from_json(text: str) -> MeasurementSet:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"measurement parse error at line {exc.lineno}: {exc.msg}") from exc
    try:
        harmonic = {}
        for key, pair in raw.get("harmonic_branch", {}).items():
            bid, h = key.split("@")
            harmonic[(int(bid), int(h))] = _phasor(pair)
        nz = raw.get("noise", {})
        return MeasurementSet(
            fundamental_branch={
                int(k): _phasor(v) for k, v in raw.get("fundamental_branch", {}).items()
            },
            harmonic_branch=harmonic,
            harmonic_source_meas=tuple(
                HarmonicSource(int(s["node"]), int(s["h"]), complex(float(s["re"]), float(s["im"])))
                for s in raw.get("harmonic_source_meas", [])
            ),
            pseudo_injections={
                int(k): _phasor(v) for k, v in raw.get("pseudo_injections", {}).items()
            },
            noise=NoiseSpec(
                pmu_fundamental_tve_pct=float(nz.get("pmu_f_tve", 0.0)),
                pmu_harmonic_tve_pct=float(nz.get("pmu_h_tve", 0.0)),
                source_meter_tve_pct=float(nz.get("src_tve", 0.0)),
                pseudo_error_pct=float(nz.get("pseudo_pct", 0.0)),
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid measurement field: {exc}") from exc
