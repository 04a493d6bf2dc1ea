"""Reading and writing the PNML subset needed for place/transition nets."""
from __future__ import annotations

import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Optional

from .errors import MalformedInput
from .petri_net import SILENT, Marking, NetError, ProcessNet, Transition


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _children(elem, name):
    return [c for c in elem if _local(c.tag) == name]


def _child(elem, name):
    for c in elem:
        if _local(c.tag) == name:
            return c
    return None


def _text_of(elem) -> Optional[str]:
    """Text of a ``<name>``/``<initialMarking>`` style element (``<text>`` child)."""
    if elem is None:
        return None
    t = _child(elem, "text")
    if t is None:
        return None
    return (t.text or "").strip()


def _net_elements(net_el):
    """Direct children of ``<net>``, descending into ``<page>`` elements only."""
    for el in net_el:
        if _local(el.tag) == "page":
            yield from _net_elements(el)
        else:
            yield el


def _is_invisible(trans) -> bool:
    for ts in _children(trans, "toolspecific"):
        if ts.get("activity") == "$invisible$" or ts.get("invisible", "").lower() == "true":
            return True
        for sub in ts.iter():
            if _local(sub.tag) == "invisible" and (sub.text or "true").strip().lower() == "true":
                return True
    return False


def _count(text: Optional[str], where: str) -> int:
    if text in (None, ""):
        return 0
    try:
        n = int(text)
    except ValueError:
        raise MalformedInput(f"{where}: token count {text!r} is not an integer") from None
    if n < 0:
        raise MalformedInput(f"{where}: negative token count {n}")
    return n


def parse_pnml(data: bytes | str, final_marking: Optional[Marking] = None) -> ProcessNet:
    """Parse a PNML document.

    The final marking comes from ``<finalmarkings>`` when present; otherwise
    ``final_marking`` must be given (it also overrides the document's).
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedInput(f"PNML is not well-formed XML: {exc}") from None
    nets = [e for e in root.iter() if _local(e.tag) == "net"]
    if not nets:
        raise MalformedInput("PNML document has no <net> element")
    net_el = nets[0]

    places: dict[str, int] = {}
    transitions: list[Transition] = []
    arcs = []
    for el in _net_elements(net_el):
        tag = _local(el.tag)
        if tag == "place":
            pid = el.get("id")
            if not pid:
                raise MalformedInput("<place> without id attribute")
            places[pid] = _count(_text_of(_child(el, "initialMarking")), f"<place id={pid!r}>")
        elif tag == "transition":
            tid = el.get("id")
            if not tid:
                raise MalformedInput("<transition> without id attribute")
            label = _text_of(_child(el, "name"))
            if not label or label.lower() == "tau" or _is_invisible(el):
                label = SILENT
            transitions.append(Transition(tid, label))
        elif tag == "arc":
            src, dst = el.get("source"), el.get("target")
            if not src or not dst:
                raise MalformedInput(f"<arc id={el.get('id')!r}> needs source and target")
            inscription = _text_of(_child(el, "inscription"))
            if inscription not in (None, "", "1"):
                raise MalformedInput(f"<arc id={el.get('id')!r}>: arc weights are not supported")
            arcs.append((src, dst))

    initial = Marking.of({p: n for p, n in places.items() if n})
    if final_marking is None:
        fm_el = next((e for e in root.iter() if _local(e.tag) == "finalmarkings"), None)
        if fm_el is None:
            raise MalformedInput("no <finalmarkings> in PNML; a final marking must be supplied")
        marking_el = _child(fm_el, "marking")
        counts = {}
        if marking_el is not None:
            for p in _children(marking_el, "place"):
                ref = p.get("idref")
                n = _count(_text_of(p), f"<finalmarkings> place {ref!r}")
                if n:
                    counts[ref] = n
        final_marking = Marking.of(counts)

    try:
        return ProcessNet.build(
            places=places.keys(),
            transitions=transitions,
            arcs=arcs,
            initial=initial,
            final=final_marking,
            name=net_el.get("id") or "net",
        )
    except NetError as exc:
        raise MalformedInput(f"<net id={net_el.get('id')!r}>: {exc}") from None


def read_pnml(path, final_marking: Optional[Marking] = None) -> ProcessNet:
    return parse_pnml(Path(path).read_bytes(), final_marking)


def parse_marking_flag(spec: str) -> Marking:
    """Parse ``place[:count],...`` as used by ``--final-marking``."""
    counts = {}
    for item in filter(None, (s.strip() for s in spec.split(","))):
        place, _, n = item.partition(":")
        try:
            counts[place] = counts.get(place, 0) + (int(n) if n else 1)
        except ValueError:
            raise ValueError(f"bad marking entry {item!r}") from None
    return Marking.of(counts)


def to_pnml(net: ProcessNet) -> str:
    """Serialize ``net`` to PNML, including a ``<finalmarkings>`` section."""
    pnml = ET.Element("pnml")
    net_el = ET.SubElement(pnml, "net", id=net.name, type="http://www.pnml.org/version-2009/grammar/pnmlcoremodel")
    page = ET.SubElement(net_el, "page", id="page0")
    init = dict(net.initial_marking.tokens)
    for p in sorted(net.places):
        pe = ET.SubElement(page, "place", id=p)
        ET.SubElement(ET.SubElement(pe, "name"), "text").text = p
        if p in init:
            ET.SubElement(ET.SubElement(pe, "initialMarking"), "text").text = str(init[p])
    for t in net.transitions:
        te = ET.SubElement(page, "transition", id=t.id)
        ET.SubElement(ET.SubElement(te, "name"), "text").text = t.label if not t.silent else "tau"
        if t.silent:
            ET.SubElement(te, "toolspecific", tool="ProM", version="6.4", activity="$invisible$")
    for i, (src, dst) in enumerate(sorted(net.arcs)):
        ET.SubElement(page, "arc", id=f"arc{i}", source=src, target=dst)
    fm = ET.SubElement(ET.SubElement(net_el, "finalmarkings"), "marking")
    for p, n in net.final_marking.tokens:
        ET.SubElement(ET.SubElement(fm, "place", idref=p), "text").text = str(n)
    ET.indent(pnml)
    return ET.tostring(pnml, encoding="unicode", xml_declaration=True)


def write_pnml(net: ProcessNet, path) -> None:
    Path(path).write_text(to_pnml(net), encoding="utf-8")
