"""Synthetic Russian-morphology corpus generator.

Produces CoNLL-U-shaped sentences from a small lexicon of regular Russian
stems with full inflection tables: noun declension over six cases and two
numbers, adjective agreement (long, short and comparative forms), two verb
conjugation classes with present/past/infinitive, personal pronouns,
numerals, prepositions governing cases, and punctuation.

The point is a deterministic, self-contained stand-in for a treebank at
desk scale: suffixes carry the grammatical signal the way they do in real
Russian, so subword models have something genuine to learn, and every
category of the core joint-accuracy set occurs in the data. Generation is
seeded and reproducible.
"""

from __future__ import annotations

import random

from .conllu import Sentence, Word

CASES = ("Nom", "Gen", "Dat", "Acc", "Ins", "Loc")

# stems are stored without the nominative ending
_NOUNS_MASC_INAN = (
    "стол", "мост", "шкаф", "стакан", "журнал", "завод", "вопрос", "ответ",
    "результат", "документ", "проект", "экран", "прибор", "сигнал", "метод",
    "закон", "билет", "рассказ", "урок", "парк",
)
_NOUNS_MASC_ANIM = (
    "студент", "кот", "волк", "слон", "тигр", "министр", "капитан",
    "инженер", "пилот", "юрист",
)
_NOUNS_FEM_INAN = (
    "книг", "дорог", "ламп", "карт", "школ", "машин", "газет", "комнат",
    "картин", "рек", "гор", "стран", "работ", "программ",
)
_NOUNS_FEM_ANIM = ("собак", "ворон")
_NOUNS_NEUT_INAN = (
    "слов", "мест", "дел", "прав", "государств", "средств", "устройств",
    "веществ", "обществ",
)

_ADJ_STEMS = (
    "нов", "стар", "бел", "красн", "умн", "быстр", "главн", "важн",
    "интересн", "холодн", "светл", "добр", "сильн", "точн", "сложн",
    "полезн", "опасн", "красив", "известн",
)

_VERBS_FIRST = (  # -ать class: present stem+ет etc., past stem+л
    "чита", "дела", "работа", "игра", "дума", "слуша", "отвеча", "лета",
    "гуля", "зна", "понима", "покупа", "открыва", "закрыва", "получа",
    "изуча", "встреча",
)
_VERBS_SECOND = ("говор", "помн", "вер", "стро", "хран", "звон", "дар", "цен")  # -ить class
_VERBS_PHASE = ("начина", "продолжа")  # take an imperfective infinitive
_VERBS_PERF = ("прочита", "сдела", "послуша", "подума", "поигра", "погуля", "узна")

_ADV_DEGREE = ("хорошо", "быстро", "медленно", "тихо", "громко", "рано", "поздно", "часто", "редко")
_ADV_PLAIN = ("вчера", "сегодня", "завтра", "здесь", "там", "снова")

_PREPOSITIONS = (
    ("в", "Loc"), ("на", "Loc"), ("у", "Gen"), ("к", "Dat"), ("с", "Ins"),
    ("о", "Loc"), ("от", "Gen"), ("для", "Gen"), ("над", "Ins"),
    ("под", "Ins"), ("при", "Loc"), ("без", "Gen"),
)

_PRONOUNS = (
    ("я", "1", "Sing", None),
    ("ты", "2", "Sing", None),
    ("он", "3", "Sing", "Masc"),
    ("она", "3", "Sing", "Fem"),
    ("оно", "3", "Sing", "Neut"),
    ("мы", "1", "Plur", None),
    ("вы", "2", "Plur", None),
    ("они", "3", "Plur", None),
)

_NUM_WORDS = ("пять", "семь", "восемь", "десять")
_NUM_DIGITS = ("5", "7", "8", "10")

_MASC_SG = {"Nom": "", "Gen": "а", "Dat": "у", "Ins": "ом", "Loc": "е"}
_MASC_PL = {"Nom": "ы", "Gen": "ов", "Dat": "ам", "Ins": "ами", "Loc": "ах"}
_FEM_SG = {"Nom": "а", "Gen": "ы", "Dat": "е", "Acc": "у", "Ins": "ой", "Loc": "е"}
_FEM_PL = {"Nom": "ы", "Gen": "", "Dat": "ам", "Ins": "ами", "Loc": "ах"}
_NEUT_SG = {"Nom": "о", "Gen": "а", "Dat": "у", "Acc": "о", "Ins": "ом", "Loc": "е"}
_NEUT_PL = {"Nom": "а", "Gen": "", "Dat": "ам", "Acc": "а", "Ins": "ами", "Loc": "ах"}

_VELARS = set("кгхжчшщ")

_ADJ_LONG = {
    ("Masc", "Nom"): "ый", ("Masc", "Gen"): "ого", ("Masc", "Dat"): "ому",
    ("Masc", "Ins"): "ым", ("Masc", "Loc"): "ом",
    ("Fem", "Nom"): "ая", ("Fem", "Gen"): "ой", ("Fem", "Dat"): "ой",
    ("Fem", "Acc"): "ую", ("Fem", "Ins"): "ой", ("Fem", "Loc"): "ой",
    ("Neut", "Nom"): "ое", ("Neut", "Gen"): "ого", ("Neut", "Dat"): "ому",
    ("Neut", "Acc"): "ое", ("Neut", "Ins"): "ым", ("Neut", "Loc"): "ом",
    ("Plur", "Nom"): "ые", ("Plur", "Gen"): "ых", ("Plur", "Dat"): "ым",
    ("Plur", "Ins"): "ыми", ("Plur", "Loc"): "ых",
}
_ADJ_SHORT = {"Masc": "", "Fem": "а", "Neut": "о", "Plur": "ы"}

_PRES_FIRST = {("1", "Sing"): "ю", ("2", "Sing"): "ешь", ("3", "Sing"): "ет",
               ("1", "Plur"): "ем", ("2", "Plur"): "ете", ("3", "Plur"): "ют"}
_PRES_SECOND = {("1", "Sing"): "ю", ("2", "Sing"): "ишь", ("3", "Sing"): "ит",
                ("1", "Plur"): "им", ("2", "Plur"): "ите", ("3", "Plur"): "ят"}
_PAST = {("Masc", "Sing"): "л", ("Fem", "Sing"): "ла", ("Neut", "Sing"): "ло", (None, "Plur"): "ли"}


_VOWELS = set("аеиоуыэюяё")


def _spell(stem: str, ending: str) -> str:
    """Velar/husher spelling rule: ы -> и after к г х ж ч ш щ."""
    if ending.startswith("ы") and stem and stem[-1] in _VELARS:
        ending = "и" + ending[1:]
    return stem + ending


def _short_masc(stem: str) -> str:
    """Fleeting vowel of short masculine adjectives: сложн -> сложен."""
    if len(stem) >= 2 and stem[-1] in "нл" and stem[-2] not in _VOWELS:
        return stem[:-1] + "е" + stem[-1]
    return stem


class _Nominal:
    __slots__ = ("stem", "gender", "animacy")

    def __init__(self, stem: str, gender: str, animacy: str):
        self.stem = stem
        self.gender = gender
        self.animacy = animacy

    def inflect(self, case: str, number: str) -> str:
        anim = self.animacy == "Anim"
        if self.gender == "Masc":
            table = _MASC_SG if number == "Sing" else _MASC_PL
            if case == "Acc":
                case = "Gen" if anim else "Nom"
        elif self.gender == "Fem":
            table = _FEM_SG if number == "Sing" else _FEM_PL
            if number == "Plur" and case == "Acc":
                case = "Gen" if anim else "Nom"
        else:
            table = _NEUT_SG if number == "Sing" else _NEUT_PL
        return _spell(self.stem, table[case])


_ALL_NOUNS = (
    [_Nominal(s, "Masc", "Inan") for s in _NOUNS_MASC_INAN]
    + [_Nominal(s, "Masc", "Anim") for s in _NOUNS_MASC_ANIM]
    + [_Nominal(s, "Fem", "Inan") for s in _NOUNS_FEM_INAN]
    + [_Nominal(s, "Fem", "Anim") for s in _NOUNS_FEM_ANIM]
    + [_Nominal(s, "Neut", "Inan") for s in _NOUNS_NEUT_INAN]
)


def _adj_long(stem: str, gender: str, number: str, case: str, anim: bool) -> str:
    key = "Plur" if number == "Plur" else gender
    if key in ("Masc", "Plur") and case == "Acc":
        case = "Gen" if anim else "Nom"
    return _spell(stem, _ADJ_LONG[(key, case)])


def _noun_word(noun: _Nominal, case: str, number: str) -> Word:
    labels = {
        "upos": "NOUN",
        "Animacy": noun.animacy,
        "Case": case,
        "Gender": noun.gender,
        "Number": number,
    }
    return Word(noun.inflect(case, number), labels)


def _adj_word(stem: str, gender: str, number: str, case: str, anim: bool) -> Word:
    labels = {"upos": "ADJ", "Case": case, "Degree": "Pos", "Number": number}
    if number == "Sing":
        labels["Gender"] = gender
    return Word(_adj_long(stem, gender, number, case, anim), labels)


class _SentenceBuilder:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.words: list[Word] = []

    def noun_phrase(self, case: str, adj_prob: float = 0.45, number: str | None = None) -> tuple[_Nominal, str]:
        rng = self.rng
        noun = rng.choice(_ALL_NOUNS)
        if number is None:
            number = "Plur" if rng.random() < 0.3 else "Sing"
        if rng.random() < adj_prob:
            self.words.append(
                _adj_word(rng.choice(_ADJ_STEMS), noun.gender, number, case, noun.animacy == "Anim")
            )
        self.words.append(_noun_word(noun, case, number))
        return noun, number

    def pronoun(self) -> tuple[str, str, str | None]:
        form, person, number, gender = self.rng.choice(_PRONOUNS)
        labels = {"upos": "PRON", "Case": "Nom", "Number": number, "Person": person, "PronType": "Prs"}
        if gender:
            labels["Gender"] = gender
        self.words.append(Word(form, labels))
        return person, number, gender

    def maybe_negation(self, prob: float = 0.15) -> None:
        if self.rng.random() < prob:
            self.words.append(Word("не", {"upos": "PART", "Polarity": "Neg"}))

    def verb_present(self, person: str, number: str, stem: str | None = None) -> None:
        rng = self.rng
        if stem is not None:
            table = _PRES_FIRST
        elif rng.random() < 0.75:
            stem, table = rng.choice(_VERBS_FIRST), _PRES_FIRST
        else:
            stem, table = rng.choice(_VERBS_SECOND), _PRES_SECOND
        labels = {
            "upos": "VERB", "Aspect": "Imp", "Mood": "Ind", "Number": number,
            "Person": person, "Tense": "Pres", "VerbForm": "Fin", "Voice": "Act",
        }
        self.words.append(Word(stem + table[(person, number)], labels))

    def predicate_present(self, person: str, number: str) -> None:
        # phase verbs take an imperfective infinitive complement
        if self.rng.random() < 0.15:
            self.verb_present(person, number, stem=self.rng.choice(_VERBS_PHASE))
            self.infinitive(imperfective_only=True)
            if self.rng.random() < 0.5:
                self.noun_phrase("Acc", adj_prob=0.25)
        else:
            self.verb_present(person, number)

    def verb_past(self, gender: str | None, number: str, stem: str | None = None) -> None:
        rng = self.rng
        aspect = "Imp"
        if stem is None:
            if rng.random() < 0.4:
                stem, aspect = rng.choice(_VERBS_PERF), "Perf"
            elif rng.random() < 0.75:
                stem = rng.choice(_VERBS_FIRST)
            else:
                stem = rng.choice(_VERBS_SECOND) + "и"
        key = (None, "Plur") if number == "Plur" else (gender or "Masc", "Sing")
        labels = {
            "upos": "VERB", "Aspect": aspect, "Mood": "Ind", "Number": number,
            "Tense": "Past", "VerbForm": "Fin", "Voice": "Act",
        }
        if number == "Sing":
            labels["Gender"] = gender or "Masc"
        self.words.append(Word(stem + _PAST[key], labels))

    def predicate_past(self, gender: str | None, number: str) -> None:
        if self.rng.random() < 0.15:
            self.verb_past(gender, number, stem=self.rng.choice(_VERBS_PHASE))
            self.infinitive(imperfective_only=True)
            if self.rng.random() < 0.5:
                self.noun_phrase("Acc", adj_prob=0.25)
        else:
            self.verb_past(gender, number)

    def infinitive(self, imperfective_only: bool = False) -> None:
        rng = self.rng
        roll = rng.random()
        if imperfective_only:
            roll *= 0.75  # fold the perfective band away
        if roll < 0.5:
            form, aspect = rng.choice(_VERBS_FIRST) + "ть", "Imp"
        elif roll < 0.75:
            form, aspect = rng.choice(_VERBS_SECOND) + "ить", "Imp"
        else:
            form, aspect = rng.choice(_VERBS_PERF) + "ть", "Perf"
        self.words.append(Word(form, {"upos": "VERB", "Aspect": aspect, "VerbForm": "Inf", "Voice": "Act"}))

    def adverb(self) -> None:
        rng = self.rng
        if rng.random() < 0.6:
            self.words.append(Word(rng.choice(_ADV_DEGREE), {"upos": "ADV", "Degree": "Pos"}))
        else:
            self.words.append(Word(rng.choice(_ADV_PLAIN), {"upos": "ADV"}))

    def prepositional_phrase(self) -> None:
        prep, case = self.rng.choice(_PREPOSITIONS)
        self.words.append(Word(prep, {"upos": "ADP"}))
        self.noun_phrase(case, adj_prob=0.3)

    def numeral_phrase(self, case_for_num: str = "Nom") -> None:
        rng = self.rng
        if rng.random() < 0.6:
            form = rng.choice(_NUM_WORDS)
            labels = {"upos": "NUM", "Case": case_for_num, "NumForm": "Word"}
        else:
            form = rng.choice(_NUM_DIGITS)
            labels = {"upos": "NUM", "NumForm": "Digit"}
        self.words.append(Word(form, labels))
        self.noun_phrase("Gen", adj_prob=0.2, number="Plur")

    def punct(self, mark: str) -> None:
        self.words.append(Word(mark, {"upos": "PUNCT"}))


def _clause(b: _SentenceBuilder) -> None:
    rng = b.rng
    template = rng.random()
    if template < 0.35:
        # nominal subject + present-tense verb
        _, number = b.noun_phrase("Nom")
        if rng.random() < 0.25:
            b.adverb()
        b.maybe_negation()
        b.predicate_present("3", number)
        _object_slot(b)
    elif template < 0.6:
        # pronoun subject, present or past
        person, number, gender = b.pronoun()
        b.maybe_negation()
        if rng.random() < 0.6:
            b.predicate_present(person, number)
        else:
            b.predicate_past(gender, number)
        _object_slot(b)
    elif template < 0.8:
        # nominal subject + past-tense verb
        subj, number = b.noun_phrase("Nom")
        b.maybe_negation()
        b.predicate_past(subj.gender, number)
        _object_slot(b)
    elif template < 0.9:
        # predicative short adjective: no case on the predicate
        noun, number = b.noun_phrase("Nom", adj_prob=0.2)
        key = "Plur" if number == "Plur" else noun.gender
        labels = {"upos": "ADJ", "Degree": "Pos", "Number": number, "Variant": "Short"}
        if number == "Sing":
            labels["Gender"] = noun.gender
        stem = rng.choice(_ADJ_STEMS)
        form = _short_masc(stem) if key == "Masc" else _spell(stem, _ADJ_SHORT[key])
        b.words.append(Word(form, labels))
    else:
        # comparative predicate: indeclinable
        b.noun_phrase("Nom", adj_prob=0.2)
        b.words.append(Word(rng.choice(_ADJ_STEMS) + "ее", {"upos": "ADJ", "Degree": "Cmp"}))


def _object_slot(b: _SentenceBuilder) -> None:
    rng = b.rng
    roll = rng.random()
    if roll < 0.5:
        b.noun_phrase("Acc")
    elif roll < 0.62:
        b.numeral_phrase()
    if rng.random() < 0.4:
        b.prepositional_phrase()
    if rng.random() < 0.2:
        b.adverb()


def generate_sentence(rng: random.Random, index: int) -> Sentence:
    b = _SentenceBuilder(rng)
    _clause(b)
    if rng.random() < 0.18:
        b.punct(",")
        conj = rng.choice(("и", "но", "а"))
        b.words.append(Word(conj, {"upos": "CCONJ"}))
        _clause(b)
    b.punct("?" if rng.random() < 0.08 else ("!" if rng.random() < 0.08 else "."))
    return Sentence(b.words, f"synth-{index}")


def generate_corpus(n_sentences: int, seed: int) -> list[Sentence]:
    """Deterministic corpus of ``n_sentences`` seeded synthetic sentences."""
    rng = random.Random(seed)
    return [generate_sentence(rng, i + 1) for i in range(n_sentences)]
