"""Synthetic documents: the built-in bib and auction schemas, plus a
generic generator that draws random documents from any DTD."""

from __future__ import annotations

import random

from ..schema import Alt, Atom, Dtd, Epsilon, Opt, Plus, Seq, Star, parse_dtd

BIB_DTD = """\
<!ELEMENT bib (book)*>
<!ELEMENT book (title,(author+|editor+),publisher,price)>
<!ELEMENT title (#PCDATA)>
<!ELEMENT author (#PCDATA)>
<!ELEMENT editor (#PCDATA)>
<!ELEMENT publisher (#PCDATA)>
<!ELEMENT price (#PCDATA)>
"""

AUCTION_DTD = """\
<!ELEMENT site (regions, people, open_auctions, closed_auctions)>
<!ELEMENT regions (australia, europe?)>
<!ELEMENT australia (item*)>
<!ELEMENT europe (item*)>
<!ELEMENT item (item_id, location, name, payment, description, shipping?)>
<!ELEMENT people (person*)>
<!ELEMENT person (person_id, name, emailaddress, phone?, address?, profile?, person_income?)>
<!ELEMENT address (street, city, country, zipcode)>
<!ELEMENT profile (profile_income?, interest*, education?)>
<!ELEMENT open_auctions (open_auction*)>
<!ELEMENT open_auction (open_auction_id, initial, current, itemref)>
<!ELEMENT closed_auctions (closed_auction*)>
<!ELEMENT closed_auction (seller, buyer, itemref, price)>
<!ELEMENT seller (seller_person)>
<!ELEMENT buyer (buyer_person)>
<!ELEMENT item_id (#PCDATA)>
<!ELEMENT location (#PCDATA)>
<!ELEMENT name (#PCDATA)>
<!ELEMENT payment (#PCDATA)>
<!ELEMENT description (#PCDATA)>
<!ELEMENT shipping (#PCDATA)>
<!ELEMENT person_id (#PCDATA)>
<!ELEMENT emailaddress (#PCDATA)>
<!ELEMENT phone (#PCDATA)>
<!ELEMENT street (#PCDATA)>
<!ELEMENT city (#PCDATA)>
<!ELEMENT country (#PCDATA)>
<!ELEMENT zipcode (#PCDATA)>
<!ELEMENT profile_income (#PCDATA)>
<!ELEMENT interest (#PCDATA)>
<!ELEMENT education (#PCDATA)>
<!ELEMENT person_income (#PCDATA)>
<!ELEMENT open_auction_id (#PCDATA)>
<!ELEMENT initial (#PCDATA)>
<!ELEMENT current (#PCDATA)>
<!ELEMENT itemref (#PCDATA)>
<!ELEMENT seller_person (#PCDATA)>
<!ELEMENT buyer_person (#PCDATA)>
<!ELEMENT price (#PCDATA)>
"""

BUILTIN_DTDS = {"bib": BIB_DTD, "auction": AUCTION_DTD}

_WORDS = ("alpha", "bravo", "delta", "river", "stone", "maple", "quartz", "harbor",
          "lumen", "cobalt", "meadow", "signal", "orchid", "tundra", "vector", "willow")
_PUBLISHERS = ("Addison-Wesley", "Morgan Kaufmann", "Springer", "Prentice Hall")
_COUNTRIES = ("Australia", "Germany", "Japan", "Brazil", "Canada")


def builtin_dtd(name: str) -> Dtd:
    try:
        return parse_dtd(BUILTIN_DTDS[name])
    except KeyError:
        raise ValueError(f"unknown schema {name!r} (choose from {sorted(BUILTIN_DTDS)})") from None


def _words(rng, lo, hi) -> str:
    return " ".join(rng.choice(_WORDS) for _ in range(rng.randint(lo, hi)))


def _leaf(tag, text) -> str:
    return f"<{tag}>{text}</{tag}>"


def _bib_book(rng, i) -> str:
    parts = [_leaf("title", _words(rng, 1, 4).title())]
    role = "author" if rng.random() < 0.8 else "editor"
    for _ in range(rng.choice((1, 1, 2, 2, 3, 4))):
        parts.append(_leaf(role, f"{_words(rng, 1, 1).title()} {_words(rng, 1, 1).title()}"))
    parts.append(_leaf("publisher", rng.choice(_PUBLISHERS)))
    parts.append(_leaf("price", f"{rng.randint(5, 150)}.{rng.randint(0, 99):02d}"))
    return "<book>" + "".join(parts) + "</book>\n"


def _item(rng, i) -> str:
    parts = [_leaf("item_id", f"item{i}"), _leaf("location", rng.choice(_COUNTRIES)),
             _leaf("name", _words(rng, 1, 3)), _leaf("payment", rng.choice(("Cash", "Creditcard"))),
             _leaf("description", _words(rng, 5, 30))]
    if rng.random() < 0.5:
        parts.append(_leaf("shipping", _words(rng, 2, 6)))
    return "<item>" + "".join(parts) + "</item>\n"


def _person(rng, i) -> str:
    parts = [_leaf("person_id", f"person{i}"),
             _leaf("name", f"{_words(rng, 1, 1).title()} {_words(rng, 1, 1).title()}"),
             _leaf("emailaddress", f"mailto:p{i}@example.org")]
    if rng.random() < 0.5:
        parts.append(_leaf("phone", f"+{rng.randint(1, 99)} {rng.randint(100000, 999999)}"))
    if rng.random() < 0.4:
        parts.append("<address>" + _leaf("street", _words(rng, 2, 3)) + _leaf("city", _words(rng, 1, 1))
                     + _leaf("country", rng.choice(_COUNTRIES))
                     + _leaf("zipcode", str(rng.randint(1000, 99999))) + "</address>")
    if rng.random() < 0.6:
        prof = []
        if rng.random() < 0.5:
            prof.append(_leaf("profile_income", f"{rng.randint(10000, 90000)}.00"))
        prof.extend(_leaf("interest", f"category{rng.randint(0, 50)}") for _ in range(rng.randint(0, 4)))
        if rng.random() < 0.5:
            prof.append(_leaf("education", rng.choice(("High School", "College", "Graduate School"))))
        parts.append("<profile>" + "".join(prof) + "</profile>")
    if rng.random() < 0.3:
        parts.append(_leaf("person_income", f"{rng.randint(10000, 90000)}.00"))
    return "<person>" + "".join(parts) + "</person>\n"


def _open_auction(rng, i) -> str:
    initial = rng.randint(1, 200)
    return ("<open_auction>" + _leaf("open_auction_id", f"open_auction{i}")
            + _leaf("initial", f"{initial}.00") + _leaf("current", f"{initial + rng.randint(0, 100)}.00")
            + _leaf("itemref", f"item{rng.randint(0, max(i, 1))}") + "</open_auction>\n")


def _closed_auction(rng, i, people) -> str:
    return ("<closed_auction><seller>" + _leaf("seller_person", f"person{rng.randrange(people)}")
            + "</seller><buyer>" + _leaf("buyer_person", f"person{rng.randrange(people)}")
            + "</buyer>" + _leaf("itemref", f"item{rng.randint(0, 1000)}")
            + _leaf("price", f"{rng.randint(1, 500)}.00") + "</closed_auction>\n")


def _fill(out: list, budget: int, make) -> int:
    """Append units from ``make(i)`` until ``budget`` bytes are used; returns the count."""
    used, i = 0, 0
    while used < budget:
        s = make(i)
        if used + len(s) > budget and i and used + len(s) - budget > budget - used:
            break
        out.append(s)
        used += len(s)
        i += 1
    return i


def _bib(rng, size) -> str:
    out = ["<bib>\n"]
    _fill(out, max(size - len("<bib>\n</bib>\n"), 0), lambda i: _bib_book(rng, i))
    out.append("</bib>\n")
    return "".join(out)


def _auction(rng, size) -> str:
    fixed = "<site>\n<regions>\n<australia>\n</australia>\n</regions>\n<people>\n</people>\n" \
            "<open_auctions>\n</open_auctions>\n<closed_auctions>\n</closed_auctions>\n</site>\n"
    budget = max(size - len(fixed), 0)
    items, people, opened, closed = [], [], [], []
    _fill(items, int(budget * 0.35), lambda i: _item(rng, i))
    n_people = _fill(people, int(budget * 0.35), lambda i: _person(rng, i))
    _fill(opened, int(budget * 0.15), lambda i: _open_auction(rng, i))
    rest = budget - sum(map(len, items + people + opened))
    _fill(closed, rest, lambda i: _closed_auction(rng, i, max(n_people, 1)))
    return ("<site>\n<regions>\n<australia>\n" + "".join(items) + "</australia>\n</regions>\n"
            "<people>\n" + "".join(people) + "</people>\n"
            "<open_auctions>\n" + "".join(opened) + "</open_auctions>\n"
            "<closed_auctions>\n" + "".join(closed) + "</closed_auctions>\n</site>\n")


def generate_data(schema: str, size: int, seed: int = 0) -> bytes:
    """A document of roughly ``size`` bytes valid for a built-in schema."""
    rng = random.Random(seed)
    if schema == "bib":
        return _bib(rng, size).encode()
    if schema == "auction":
        return _auction(rng, size).encode()
    raise ValueError(f"unknown schema {schema!r} (choose from {sorted(BUILTIN_DTDS)})")


# --------------------------------------------------------------------------
# random documents for arbitrary (non-recursive) DTDs


def random_word(r, rng: random.Random, max_repeat: int = 3) -> list[str]:
    """A random word of the language of content model ``r``."""
    if isinstance(r, Epsilon):
        return []
    if isinstance(r, Atom):
        return [r.symbol]
    if isinstance(r, Seq):
        return [s for it in r.items for s in random_word(it, rng, max_repeat)]
    if isinstance(r, Alt):
        return random_word(rng.choice(r.items), rng, max_repeat)
    if isinstance(r, Opt):
        if max_repeat and rng.random() < 0.5:
            return random_word(r.child, rng, max_repeat)
        return []
    if isinstance(r, (Star, Plus)):
        lo = 1 if isinstance(r, Plus) else 0
        n = rng.randint(lo, max(lo, max_repeat))
        return [s for _ in range(n) for s in random_word(r.child, rng, max_repeat)]
    raise TypeError(f"not a regular expression: {r!r}")


def random_document(dtd: Dtd, rng: random.Random, max_elements: int = 200,
                    max_repeat: int = 3, texts=("a", "b", "1", "2", "10")) -> str:
    """A random document valid for ``dtd``.

    Repetition counts shrink once the element budget is used up, so the
    document stays near ``max_elements`` (it can exceed it only where the
    content model forces more children).
    """
    count = 0
    out: list[str] = []

    def element(tag, depth):
        nonlocal count
        count += 1
        if depth > 50:
            raise ValueError("random_document needs a non-recursive DTD")
        out.append(f"<{tag}>")
        if tag in dtd.text_only:
            out.append(rng.choice(texts))
        else:
            rep = max_repeat if count < max_elements else 0
            for child in random_word(dtd.production(tag), rng, rep):
                element(child, depth + 1)
        out.append(f"</{tag}>")

    element(dtd.root, 0)
    return "".join(out)
