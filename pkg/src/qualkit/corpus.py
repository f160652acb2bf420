"""Deterministic generator of a component database, qualification catalog,
ground-truth match labels, and ground-truth cleaning rules.

Matching structure is built from identity cells: groups of components that
share (package, subpackage, manufacturer). Cards attached to a cell are
direct matches for the one member whose part number they carry and
similarity matches for every other member. Alternative matches come from
pairs of cells that share the attributes of the family rule (package +
manufacturer for the generic rule; package + pitch + assembly with pin
dimensions inside the ±5 µm window for flat packages), which lets the
generator steer the average match counts toward the configured targets.

The explicit qualification count, when given, wins over the marginal
targets (the two cannot both hold at every scale); leave it unset to have
the generator derive the count that honors the configured averages.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from random import Random

from . import csvio
from .model import (
    GroundTruth,
    GroundTruthMatches,
    PlmComponent,
    QualificationCard,
    RuleTable,
    Status,
    ValidationError,
)

FAMILIES = ("FP", "Hybrid", "Capacitor", "Resistor", "Inductor", "Diode")
FAMILY_PKG_PREFIX = {
    "FP": "FP",
    "Hybrid": "H",
    "Capacitor": "C",
    "Resistor": "R",
    "Inductor": "L",
    "Diode": "D",
}

PIN_WINDOW_UM = Decimal("5")
_PIN_IN = Decimal("100")
_PIN_OUT = Decimal("120")

_STATUS_WEIGHTS = [
    (Status.CLOSED, 0.6),
    (Status.ONGOING, 0.2),
    (Status.FAILED, 0.1),
    (Status.OBSOLETE, 0.1),
]

_SUFFIX_FORMS = [
    "{} Corp",
    "{} Inc.",
    "{} Corporation",
    "{} Incorporated",
    "{} Ltd",
    "{} GmbH",
    "{} SpA",
    "{} SA",
    "{} International",
    "{} Inter.",
]

_FP_PITCHES = ["0.5", "0.635", "0.8", "1", "1.27"]
_GEN_PITCHES = ["0.5", "1", "1.27", "1.92", "2.2", "2.54"]
_ASSEMBLY = ["SMT", "THT", "HS", "Wave", "Mixed"]
_LEAD_FINISH = ["Sn", "SnPb", "Au", "NiPdAu"]
_RAW_MATERIAL = ["FR4", "polyimide", "alumina", "ceramic"]
_QUAL_TYPES = ["full", "delta", "partial"]
_COATINGS = ["acrylic", "silicone", "urethane"]
_SUBSTRATES = ["FR4", "polyimide", "alumina"]
_STANDOFFS = ["0.1-0.2", "0.2-0.3", "0.3-0.5"]

# Note skeletons; {pn} is the part-number phrase with a trailing space, or
# empty when the phrase is injected as missing. No other skeleton word may
# read as a bare 'pn' marker followed by a long alphanumeric token.
_NOTE_TEMPLATES = [
    "R{r} {pn}double component soldered on double pad, stand-off {so} mm",
    "Assembly {pkg} qualified {pn}with {asm} process on {mat} substrate",
    "Reflow profile verified for {pkg} {pn}stand-off {so} mm",
    "Thermal cycling report for {pkg} {pn}lot screened, {asm} mount",
    "{pn}vibration and shock campaign closed for package {pkg}",
    "Coupon batch {r} {pn}humidity bake completed, {mat} carrier",
    "Wire bond pull and shear tests passed {pn}on {pkg} samples",
    "Visual inspection annex for {pkg} {pn}{asm} line, no defects",
    "Qualification extension {pn}covering {pkg}, stand-off {so} mm",
    "Die attach voiding below limit {pn}for {pkg} on {mat}",
    "Solderability per standard {pn}verified, {asm} process, batch {r}",
    "Outgassing screening {pn}completed for {pkg}, {mat} substrate",
]

_SYLLABLES = [
    "ba", "ce", "dor", "el", "fen", "gar", "hel", "ir", "jol", "kan",
    "lum", "mer", "nor", "os", "pra", "quen", "ril", "sol", "tav", "ur",
    "vex", "wil", "xan", "yor", "zeb",
]


@dataclass(frozen=True)
class CorpusConfig:
    n_components: int
    n_qualifications: int | None = None
    seed: int = 0
    never_qualified_fraction: float = 0.1748
    avg_direct: float = 0.63
    avg_similarity: float = 7.98
    avg_alternative: float = 2.23
    manufacturer_variant_rate: float = 0.5
    pn_missing_rate: float = 0.02
    n_manufacturers: int = 50

    def validate(self) -> None:
        if self.n_components < 1:
            raise ValidationError("n_components: must be positive")
        if self.n_qualifications is not None and self.n_qualifications < 0:
            raise ValidationError("n_qualifications: must be nonnegative")
        if self.n_manufacturers < 1:
            raise ValidationError("n_manufacturers: must be positive")
        for name in ("never_qualified_fraction", "manufacturer_variant_rate",
                     "pn_missing_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name}: must be in [0, 1]")
        for name in ("avg_direct", "avg_similarity", "avg_alternative"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name}: must be nonnegative")


@dataclass
class Corpus:
    config: CorpusConfig
    components: list[PlmComponent]
    cards: list[QualificationCard]
    truth: GroundTruth


@dataclass
class _Cell:
    index: int
    family: str
    size: int
    card_count: int = 0
    package: str = ""
    subpackage: str = ""
    manufacturer: str = ""
    pitch: str = ""
    assembly: str = ""
    partner: int | None = None
    members: list[int] = field(default_factory=list)
    toggled: set[int] = field(default_factory=set)


def _make_manufacturers(rng: Random, count: int) -> tuple[list[str], dict[str, list[str]]]:
    names: list[str] = []
    seen: set[str] = set()
    while len(names) < count:
        word = "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 3)))
        name = word.capitalize()
        key = name.casefold()
        if key in seen or key in {"corp", "inc", "ltd", "sa", "spa", "gmbh", "inter"}:
            continue
        seen.add(key)
        names.append(name)
    pools: dict[str, list[str]] = {}
    for name in names:
        forms = [form.format(name) for form in _SUFFIX_FORMS]
        forms += [name.upper(), name.lower()]
        forms += [form.format(name.upper()) for form in _SUFFIX_FORMS[:4]]
        forms = [f for f in dict.fromkeys(forms) if f != name]
        rng.shuffle(forms)
        pools[name] = forms[: rng.randint(8, 11)]
    return names, pools


def _cell_sizes(total: int, mean: float) -> list[int]:
    """Sizes whose running sum tracks round(i * mean): average hits `mean` exactly."""
    mean = max(mean, 1.0)
    sizes: list[int] = []
    assigned = 0
    acc = 0.0
    while assigned < total:
        acc += mean
        size = min(max(1, round(acc) - assigned), total - assigned)
        sizes.append(size)
        assigned += size
    return sizes


def _pick_status(rng: Random) -> Status:
    return rng.choices(
        [s for s, _ in _STATUS_WEIGHTS], weights=[w for _, w in _STATUS_WEIGHTS]
    )[0]


def generate(config: CorpusConfig) -> Corpus:
    """Pure function of (config, seed): identical inputs give identical corpora."""
    config.validate()
    rng = Random(config.seed)

    n_c = config.n_components
    never = round(config.never_qualified_fraction * n_c)
    qualified = n_c - never
    if config.n_qualifications is None:
        n_q = round(config.avg_direct * qualified)
    else:
        n_q = config.n_qualifications
    if qualified == 0 and n_q > 0:
        raise ValidationError(
            "n_qualifications: must be 0 when never_qualified_fraction leaves "
            "no qualified components"
        )

    canonicals, variant_pools = _make_manufacturers(rng, config.n_manufacturers)
    rules = RuleTable(
        {
            variant: canonical
            for canonical, pool in variant_pools.items()
            for variant in pool
        }
    )

    # Identity cells over the qualified components.
    if config.avg_direct > 0:
        mean_size = (config.avg_direct + config.avg_similarity) / config.avg_direct
    else:
        mean_size = config.avg_similarity + 1.0
    cells = [
        _Cell(index=i, family=FAMILIES[i % len(FAMILIES)], size=size)
        for i, size in enumerate(_cell_sizes(qualified, mean_size))
    ]

    for pick in rng.choices(range(len(cells)), weights=[c.size for c in cells], k=n_q) if cells and n_q else []:
        cells[pick].card_count += 1

    # Alternative-match quota: coarse fill by pairing generic-family cells on
    # (package, manufacturer), fine fill by toggling FP components into the
    # pin window of a partner cell.
    quota = round(config.avg_alternative * qualified)
    total_alt = 0
    generic_cells = [c for c in cells if c.family != "FP"]
    fp_cells = [c for c in cells if c.family == "FP"]
    rng.shuffle(generic_cells)
    rng.shuffle(fp_cells)
    generic_cap = 0.65 * quota
    for left, right in zip(generic_cells[::2], generic_cells[1::2]):
        contribution = left.size * right.card_count + right.size * left.card_count
        if contribution == 0 or total_alt + contribution > generic_cap:
            continue
        left.partner, right.partner = right.index, left.index
        total_alt += contribution

    fp_pairs = list(zip(fp_cells[::2], fp_cells[1::2]))
    for left, right in fp_pairs:
        if left.card_count == 0 and right.card_count == 0:
            continue
        left.partner, right.partner = right.index, left.index
        for cell, partner in ((left, right), (right, left)):
            for slot in range(cell.size):
                if total_alt + partner.card_count > quota or partner.card_count == 0:
                    break
                cell.toggled.add(slot)
                total_alt += partner.card_count

    # Attribute assignment. Packages are unique per cell group, which is what
    # keeps unrelated cells from colliding under any match rule.
    pkg_counters = dict.fromkeys(FAMILY_PKG_PREFIX.values(), 0)

    def next_pkg(family: str) -> str:
        prefix = FAMILY_PKG_PREFIX[family]
        pkg_counters[prefix] += 1
        return f"{prefix}{pkg_counters[prefix]}"

    spkg_counter = 0

    def next_spkg() -> str:
        nonlocal spkg_counter
        spkg_counter += 1
        return f"a{spkg_counter}"

    by_index = {c.index: c for c in cells}
    for cell in cells:
        if cell.package:
            continue
        cell.manufacturer = rng.choice(canonicals)
        cell.package = next_pkg(cell.family)
        cell.subpackage = next_spkg()
        cell.pitch = rng.choice(_FP_PITCHES if cell.family == "FP" else _GEN_PITCHES)
        cell.assembly = rng.choice(_ASSEMBLY)
        if cell.partner is not None:
            partner = by_index[cell.partner]
            partner.package = cell.package
            partner.subpackage = next_spkg()
            partner.pitch = cell.pitch
            partner.assembly = cell.assembly
            if cell.family == "FP":
                partner.manufacturer = rng.choice(canonicals)
            else:
                partner.manufacturer = cell.manufacturer

    components: list[PlmComponent] = []
    pn_counter = 1000000

    def next_pn() -> str:
        nonlocal pn_counter
        pn_counter += 1
        return f"P{pn_counter}"

    for cell in cells:
        for slot in range(cell.size):
            pn = next_pn()
            cell.members.append(len(components))
            if cell.family == "FP":
                pin = _PIN_IN if slot in cell.toggled else _PIN_OUT
                pitch = cell.pitch
                assembly = cell.assembly
            else:
                pin = Decimal(rng.randrange(50, 500, 25))
                pitch = rng.choice(_GEN_PITCHES)
                assembly = rng.choice(_ASSEMBLY)
            components.append(
                PlmComponent(
                    part_number=pn,
                    package_code=cell.package,
                    subpackage_code=cell.subpackage,
                    manufacturer_name=cell.manufacturer,
                    family=cell.family,
                    pitch=Decimal(pitch),
                    pin_dimension=pin,
                    lead_finish=rng.choice(_LEAD_FINISH),
                    raw_material=rng.choice(_RAW_MATERIAL),
                    package_length=Decimal(rng.randrange(2, 40)) / 2,
                    package_width=Decimal(rng.randrange(2, 40)) / 2,
                    package_height=Decimal(rng.randrange(1, 10)) / 2,
                    assembly_type=assembly,
                    generic_pn=f"G{pn[1:]}" if rng.random() < 0.3 else None,
                )
            )

    for i in range(never):
        family = FAMILIES[i % len(FAMILIES)]
        components.append(
            PlmComponent(
                part_number=next_pn(),
                package_code=next_pkg(family),
                subpackage_code=next_spkg(),
                manufacturer_name=rng.choice(canonicals),
                family=family,
                pitch=Decimal(rng.choice(_GEN_PITCHES)),
                pin_dimension=Decimal(rng.randrange(50, 500, 25)),
                lead_finish=rng.choice(_LEAD_FINISH),
                raw_material=rng.choice(_RAW_MATERIAL),
                package_length=Decimal(rng.randrange(2, 40)) / 2,
                package_width=Decimal(rng.randrange(2, 40)) / 2,
                package_height=Decimal(rng.randrange(1, 10)) / 2,
                assembly_type=rng.choice(_ASSEMBLY),
                generic_pn=None,
            )
        )

    # Cards, owner components, raw-variant manufacturers, notes.
    cards: list[QualificationCard] = []
    pn_by_qual: dict[str, str | None] = {}
    allocation: list[_Cell] = []
    for cell in cells:
        allocation.extend([cell] * cell.card_count)
    for card_no, cell in enumerate(allocation, start=1):
        owner = components[rng.choice(cell.members)]
        number = f"qc{card_no}"
        pn_by_qual[number] = owner.part_number
        missing = rng.random() < config.pn_missing_rate
        phrase = "" if missing else f"(pn {owner.part_number}) "
        note = _NOTE_TEMPLATES[rng.randrange(len(_NOTE_TEMPLATES))].format(
            pn=phrase,
            r=rng.randint(1, 9),
            so=rng.choice(_STANDOFFS),
            pkg=cell.package,
            asm=cell.assembly if cell.family == "FP" else rng.choice(_ASSEMBLY),
            mat=rng.choice(_RAW_MATERIAL),
        )
        raw_name = cell.manufacturer
        if rng.random() < config.manufacturer_variant_rate:
            pool = variant_pools[cell.manufacturer]
            if pool:
                raw_name = rng.choice(pool)
        if cell.family == "FP":
            pitch, pin, assembly = Decimal(cell.pitch), _PIN_IN, cell.assembly
        else:
            pitch, pin, assembly = owner.pitch, owner.pin_dimension, owner.assembly_type
        cards.append(
            QualificationCard(
                number=number,
                package_code=cell.package,
                subpackage_code=cell.subpackage,
                manufacturer_name=raw_name,
                status=_pick_status(rng),
                notes=note,
                part_number=None,
                qualification_type=rng.choice(_QUAL_TYPES),
                description=f"Qualification of {cell.package} parts",
                documentation=f"DOC-{card_no:05d}",
                conformal_coating=rng.choice(_COATINGS),
                substrate_material=rng.choice(_SUBSTRATES),
                assembly_type=assembly,
                pitch=pitch,
                pin_dimension=pin,
                family=cell.family,
            )
        )

    truth = GroundTruth(
        matches=label_matches(components, cards, rules, pn_by_qual),
        rules=rules,
        pn_by_qual=pn_by_qual,
    )
    return Corpus(config=config, components=components, cards=cards, truth=truth)


def label_matches(
    components: list[PlmComponent],
    cards: list[QualificationCard],
    rules: RuleTable,
    pn_by_qual: dict[str, str | None],
) -> dict[str, GroundTruthMatches]:
    """Match labels from full knowledge (true owner PNs), disjoint by priority
    direct > similarity > alternative."""
    from .retrieval import passes_family_rule

    by_triple: dict[tuple[str, str, str], list[int]] = {}
    for i, comp in enumerate(components):
        key = (comp.package_code, comp.subpackage_code, rules.lookup(comp.manufacturer_name))
        by_triple.setdefault(key, []).append(i)

    direct: dict[str, set[str]] = {c.part_number: set() for c in components}
    similar: dict[str, set[str]] = {c.part_number: set() for c in components}
    alt: dict[str, set[str]] = {c.part_number: set() for c in components}

    for card in cards:
        true_pn = pn_by_qual.get(card.number)
        key = (card.package_code, card.subpackage_code, rules.lookup(card.manufacturer_name))
        for i in by_triple.get(key, []):
            comp = components[i]
            if true_pn is not None and comp.part_number == true_pn:
                direct[comp.part_number].add(card.number)
            else:
                similar[comp.part_number].add(card.number)

    by_generic: dict[tuple[str, str], list[QualificationCard]] = {}
    by_fp: dict[tuple[str, str, str], list[QualificationCard]] = {}
    for card in cards:
        canonical = rules.lookup(card.manufacturer_name)
        by_generic.setdefault((card.package_code, canonical), []).append(card)
        if card.pitch is not None and card.assembly_type is not None:
            fp_key = (card.package_code, str(card.pitch.normalize()), card.assembly_type)
            by_fp.setdefault(fp_key, []).append(card)

    for comp in components:
        if comp.family == "FP":
            key = (comp.package_code, str(comp.pitch.normalize()), comp.assembly_type or "")
            candidates = by_fp.get(key, [])
        else:
            candidates = by_generic.get(
                (comp.package_code, rules.lookup(comp.manufacturer_name)), []
            )
        for card in candidates:
            if passes_family_rule(comp, card, rules):
                alt[comp.part_number].add(card.number)

    out: dict[str, GroundTruthMatches] = {}
    for comp in components:
        pn = comp.part_number
        taken = direct[pn] | similar[pn]
        out[pn] = GroundTruthMatches(
            direct=frozenset(direct[pn]),
            similarity=frozenset(similar[pn]),
            alternative=frozenset(alt[pn] - taken),
        )
    return out


def truth_to_json(truth: GroundTruth) -> str:
    payload = {
        "matches": {
            pn: {
                "direct": sorted(m.direct),
                "similarity": sorted(m.similarity),
                "alternative": sorted(m.alternative),
            }
            for pn, m in truth.matches.items()
        },
        "pn_by_qual": truth.pn_by_qual,
    }
    return json.dumps(payload, sort_keys=True, indent=1)


def truth_from_json(text: str) -> GroundTruth:
    payload = json.loads(text)
    matches = {
        pn: GroundTruthMatches(
            direct=frozenset(m["direct"]),
            similarity=frozenset(m["similarity"]),
            alternative=frozenset(m["alternative"]),
        )
        for pn, m in payload["matches"].items()
    }
    return GroundTruth(matches=matches, rules=RuleTable({}), pn_by_qual=payload["pn_by_qual"])


def emit(corpus: Corpus, out_dir: Path) -> list[Path]:
    """Write plm.csv, qc.csv, truth.json, truth_rules.csv; reruns are byte-identical.

    The qc.csv part_number column is left empty: recovering it is the
    cleaning pipeline's job. True PNs live in truth.json.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plm_path = out_dir / "plm.csv"
    qc_path = out_dir / "qc.csv"
    truth_path = out_dir / "truth.json"
    rules_path = out_dir / "truth_rules.csv"
    csvio.write_plm(plm_path, corpus.components)
    csvio.write_qc(qc_path, corpus.cards)
    truth_path.write_text(truth_to_json(corpus.truth), encoding="utf-8")
    csvio.write_rules(rules_path, corpus.truth.rules)
    return [plm_path, qc_path, truth_path, rules_path]


def table1_corpus() -> Corpus:
    """Tiny fixed corpus shaped like the published example records: three
    components, three cards, three manufacturer-variant rules."""
    components = [
        PlmComponent(
            part_number="P1111111", package_code="FP1", subpackage_code="a1",
            manufacturer_name="ABC", family="Hybrid", pitch=Decimal("1.27"),
            pin_dimension=Decimal("100"), lead_finish="Sn", raw_material="FR4",
            assembly_type="SMT", generic_pn="G1111111",
        ),
        PlmComponent(
            part_number="P2222222", package_code="C2", subpackage_code="x2",
            manufacturer_name="XYZ", family="Capacitor", pitch=Decimal("2.2"),
            pin_dimension=Decimal("150"), lead_finish="SnPb", raw_material="ceramic",
            assembly_type="THT", generic_pn="G2222222",
        ),
        PlmComponent(
            part_number="P3333333", package_code="R1", subpackage_code="a3",
            manufacturer_name="ABC", family="Resistor", pitch=Decimal("1.92"),
            pin_dimension=Decimal("200"), lead_finish="Sn", raw_material="alumina",
            assembly_type="HS", generic_pn="G3333333",
        ),
    ]
    notes = {
        "qc1": "Assembly FP1 qualified (pn P1111111) with SMT process on FR4 substrate",
        "qc2": "Reflow profile verified for C2 (pn P2222222) stand-off 0.2-0.3 mm",
        "qc3": "R1 (pn P3333333) double component soldered on double pad, stand-off 0.2-0.3 mm",
    }
    cards = [
        QualificationCard(
            number="qc1", package_code="FP1", subpackage_code="a1",
            manufacturer_name="ABC Corp", status=Status.CLOSED, notes=notes["qc1"],
            qualification_type="full", description="Qualification of FP1 parts",
            documentation="DOC-00001", conformal_coating="acrylic",
            substrate_material="FR4", assembly_type="SMT",
            pitch=Decimal("1.27"), pin_dimension=Decimal("100"), family="Hybrid",
        ),
        QualificationCard(
            number="qc2", package_code="C2", subpackage_code="x2",
            manufacturer_name="XYZ Inc.", status=Status.CLOSED, notes=notes["qc2"],
            qualification_type="full", description="Qualification of C2 parts",
            documentation="DOC-00002", conformal_coating="silicone",
            substrate_material="ceramic", assembly_type="THT",
            pitch=Decimal("2.2"), pin_dimension=Decimal("150"), family="Capacitor",
        ),
        QualificationCard(
            number="qc3", package_code="R1", subpackage_code="a3",
            manufacturer_name="ABC Inter.", status=Status.ONGOING, notes=notes["qc3"],
            qualification_type="delta", description="Qualification of R1 parts",
            documentation="DOC-00003", conformal_coating="acrylic",
            substrate_material="alumina", assembly_type="HS",
            pitch=Decimal("1.92"), pin_dimension=Decimal("200"), family="Resistor",
        ),
    ]
    rules = RuleTable({"ABC Corp": "ABC", "ABC Inter.": "ABC", "XYZ Inc.": "XYZ"})
    pn_by_qual = {"qc1": "P1111111", "qc2": "P2222222", "qc3": "P3333333"}
    truth = GroundTruth(
        matches=label_matches(components, cards, rules, pn_by_qual),
        rules=rules,
        pn_by_qual=pn_by_qual,
    )
    config = CorpusConfig(n_components=3, n_qualifications=3, seed=1)
    return Corpus(config=config, components=components, cards=cards, truth=truth)
