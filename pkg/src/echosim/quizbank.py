"""Bundled study material: one fact card per acoustic window plus a bank of
multiple-choice items asking for the notch direction, the tilt band, and the
anatomy each window shows.

The bank is self-consistent by construction and `validate_bank` enforces it:
every correct answer string appears verbatim somewhere in the fact cards, so
a learner who has read the cards has seen every answer. Distractors are
drawn from the other windows' values and carry no such guarantee.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .session import QuizItem, View

FACT_CARDS: dict[View, str] = {
    View.APICAL: (
        "Apical imaging starts over the cardiac apex with the notch toward "
        "3 o'clock. A flat probe shows all four chambers at once; tilting "
        "the tail 5 to 10 degrees toward the head brings the left "
        "ventricular outflow tract into view."
    ),
    View.PLAX: (
        "PLAX is acquired beside the sternum with the notch toward "
        "11 o'clock. The long-axis cut follows the left ventricle from apex "
        "to base, and a 5 to 10 degrees tilt opens the aortic root."
    ),
    View.PSAX: (
        "PSAX uses the same parasternal spot with the notch rotated toward "
        "1 o'clock. The short-axis stack sweeps from the papillary muscles "
        "up to the aortic valve as the tail tilts 5 to 10 degrees."
    ),
    View.SUBCOSTAL: (
        "Subcostal imaging looks up at the heart through the liver with the "
        "notch toward 3 o'clock, a favourite in neonates and in ventilated "
        "patients. Reaching all four chambers takes a steep 40 to 45 "
        "degrees tilt."
    ),
    View.SUPRASTERNAL: (
        "Suprasternal imaging drops the probe into the sternal notch, notch "
        "toward 1 o'clock. A 5 to 10 degrees tilt lines the beam up with "
        "the aortic arch and the great vessels leaving it."
    ),
}

_CLOCKS = ("3 o'clock", "11 o'clock", "1 o'clock", "6 o'clock")
_BANDS = ("5 to 10 degrees", "40 to 45 degrees",
          "15 to 20 degrees", "0 to 5 degrees")


@dataclass(frozen=True)
class QuizBank:
    facts: dict[View, str]
    items: tuple[QuizItem, ...]

    def by_id(self, item_id: str) -> QuizItem:
        for item in self.items:
            if item.id == item_id:
                return item
        raise KeyError(item_id)


def _clock_item(view: View, answer: str, distractors: tuple[str, str, str],
                slot: int) -> QuizItem:
    options = list(distractors)
    options.insert(slot, answer)
    return QuizItem(
        id=f"{view.value.lower()}-notch",
        prompt=f"Toward which clock direction does the probe notch point "
               f"for the {view.value} window?",
        options=tuple(options),
        answer_index=slot,
        explanation=FACT_CARDS[view],
    )


def _band_item(view: View, answer: str, distractors: tuple[str, str, str],
               slot: int) -> QuizItem:
    options = list(distractors)
    options.insert(slot, answer)
    return QuizItem(
        id=f"{view.value.lower()}-tilt",
        prompt=f"How far is the probe tail tilted for the {view.value} "
               f"tilt view?",
        options=tuple(options),
        answer_index=slot,
        explanation=FACT_CARDS[view],
    )


def _anatomy_item(view: View, prompt: str, answer: str,
                  distractors: tuple[str, str, str], slot: int) -> QuizItem:
    options = list(distractors)
    options.insert(slot, answer)
    return QuizItem(
        id=f"{view.value.lower()}-anatomy",
        prompt=prompt,
        options=tuple(options),
        answer_index=slot,
        explanation=FACT_CARDS[view],
    )


def default_bank() -> QuizBank:
    items = (
        _clock_item(View.APICAL, "3 o'clock",
                    ("11 o'clock", "1 o'clock", "6 o'clock"), 0),
        _band_item(View.APICAL, "5 to 10 degrees",
                   ("40 to 45 degrees", "15 to 20 degrees", "0 to 5 degrees"), 2),
        _anatomy_item(View.APICAL,
                      "Tilting the apical probe 5 to 10 degrees brings which "
                      "structure into view?",
                      "the left ventricular outflow tract",
                      ("the aortic arch", "the papillary muscles",
                       "the liver"), 1),
        _clock_item(View.PLAX, "11 o'clock",
                    ("3 o'clock", "1 o'clock", "9 o'clock"), 1),
        _band_item(View.PLAX, "5 to 10 degrees",
                   ("40 to 45 degrees", "10 to 15 degrees", "0 to 5 degrees"), 0),
        _anatomy_item(View.PLAX,
                      "A small tilt from the standard PLAX cut opens which "
                      "structure?",
                      "the aortic root",
                      ("the aortic arch", "the left ventricular outflow tract",
                       "the papillary muscles"), 3),
        _clock_item(View.PSAX, "1 o'clock",
                    ("11 o'clock", "3 o'clock", "7 o'clock"), 2),
        _band_item(View.PSAX, "5 to 10 degrees",
                   ("40 to 45 degrees", "20 to 25 degrees", "0 to 5 degrees"), 1),
        _anatomy_item(View.PSAX,
                      "The PSAX short-axis sweep starts at which landmark "
                      "before tilting toward the aortic valve?",
                      "the papillary muscles",
                      ("the aortic root", "the liver",
                       "the great vessels"), 0),
        _clock_item(View.SUBCOSTAL, "3 o'clock",
                    ("1 o'clock", "11 o'clock", "5 o'clock"), 3),
        _band_item(View.SUBCOSTAL, "40 to 45 degrees",
                   ("5 to 10 degrees", "15 to 20 degrees", "60 to 65 degrees"), 1),
        _anatomy_item(View.SUBCOSTAL,
                      "The subcostal window reaches the heart through which "
                      "organ?",
                      "the liver",
                      ("the aortic arch", "the aortic root",
                       "the papillary muscles"), 2),
        _clock_item(View.SUPRASTERNAL, "1 o'clock",
                    ("3 o'clock", "11 o'clock", "12 o'clock"), 0),
        _band_item(View.SUPRASTERNAL, "5 to 10 degrees",
                   ("40 to 45 degrees", "25 to 30 degrees", "0 to 5 degrees"), 3),
        _anatomy_item(View.SUPRASTERNAL,
                      "From the sternal notch the beam lines up with which "
                      "structure?",
                      "the aortic arch",
                      ("the papillary muscles", "the liver",
                       "the aortic root"), 1),
    )
    bank = QuizBank(facts=dict(FACT_CARDS), items=items)
    validate_bank(bank)
    return bank


def validate_bank(bank: QuizBank) -> None:
    """Raise ValueError unless the bank is internally consistent: unique
    ids, 2+ options each, in-range answers (QuizItem enforces that), and
    every correct answer present verbatim in at least one fact card."""
    seen: set[str] = set()
    corpus = "\n".join(bank.facts.values())
    for item in bank.items:
        if item.id in seen:
            raise ValueError(f"duplicate quiz item id {item.id!r}")
        seen.add(item.id)
        if len(item.options) < 2:
            raise ValueError(f"item {item.id!r} needs at least two options")
        if len(set(item.options)) != len(item.options):
            raise ValueError(f"item {item.id!r} repeats an option")
        answer = item.options[item.answer_index]
        if answer not in corpus:
            raise ValueError(
                f"item {item.id!r} answer {answer!r} not found in fact cards")


def save_bank(bank: QuizBank, path: str | Path) -> None:
    doc = {
        "facts": {view.value: text for view, text in bank.facts.items()},
        "items": [
            {"id": i.id, "prompt": i.prompt, "options": list(i.options),
             "answer_index": i.answer_index, "explanation": i.explanation}
            for i in bank.items
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_bank(path: str | Path) -> QuizBank:
    raw = json.loads(Path(path).read_text())
    try:
        facts = {View(name): str(text) for name, text in raw["facts"].items()}
        items = tuple(
            QuizItem(id=str(r["id"]), prompt=str(r["prompt"]),
                     options=tuple(str(o) for o in r["options"]),
                     answer_index=int(r["answer_index"]),
                     explanation=str(r.get("explanation", "")))
            for r in raw["items"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed quiz bank: {exc}") from exc
    bank = QuizBank(facts=facts, items=items)
    validate_bank(bank)
    return bank


def bank_to_json(bank: QuizBank) -> str:
    return json.dumps({
        "facts": {view.value: text for view, text in bank.facts.items()},
        "items": [
            {"id": i.id, "prompt": i.prompt, "options": list(i.options)}
            for i in bank.items
        ],
    })
