"""Background prompt expansion for the three background themes."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List

import requests

from .errors import BackendFailure, EndpointUnreachable


class Theme(str, enum.Enum):
    SEASONAL = "Seasonal"
    SKY = "Sky"
    NATURAL_LANDSCAPE = "NaturalLandscape"


# Descriptions per theme at full corpus scale; the three themes are near-equal.
DEFAULT_THEME_COUNTS = {
    Theme.SEASONAL: 3387,
    Theme.SKY: 3399,
    Theme.NATURAL_LANDSCAPE: 3399,
}
DEFAULT_SEEDS_PER_PROMPT = 11

SKY_WORDS = ("sky", "clouds", "atmosphere", "aurora", "horizon")


@dataclass(frozen=True)
class ThemePrompt:
    theme: Theme
    text: str

    def __post_init__(self):
        object.__setattr__(self, "theme", Theme(self.theme))
        if not self.text.strip():
            raise ValueError("prompt text must be non-empty")


_BASE = {
    Theme.SEASONAL: [
        "An orchard of apple trees in full spring blossom, white petals drifting across fresh green grass.",
        "A quiet birch wood in early autumn, yellow leaves carpeting the ground beneath pale trunks.",
        "A snow-covered pine forest after a winter storm, branches bowed low under fresh powder.",
        "A sunflower field at the height of summer, rows of heavy golden heads facing a bright sky.",
        "A maple-lined country lane in late autumn, crimson and amber leaves scattered on wet gravel.",
        "A frozen pond in a winter meadow, frost-covered reeds standing along its edges.",
        "A lavender field in early summer, purple rows running towards a low line of distant hills.",
        "A meadow thawing in early spring, patches of old snow between the first green shoots.",
        "A vineyard in harvest season, vines heavy with dark grapes and leaves turning copper.",
        "A tulip field in spring, broad stripes of red, yellow and pink under a soft morning haze.",
    ],
    Theme.SKY: [
        "A vast open sky filled with towering white cumulus clouds over a flat, empty horizon.",
        "A pastel dawn sky fading from soft pink to pale blue, thin clouds catching the first light.",
        "A deep night sky crowded with stars and the faint band of the Milky Way.",
        "A dramatic storm sky with dark anvil clouds and shafts of sunlight breaking through.",
        "An aurora sky rippling with green and violet curtains of light above a silent horizon.",
        "A clear cobalt sky at high noon with a single thin contrail crossing it.",
        "A sunset sky ablaze with orange and magenta streaks of high cirrus clouds.",
        "A hazy summer sky with soft diffuse light and low, scattered clouds.",
        "A twilight sky of deep indigo with a thin crescent moon low near the horizon.",
        "A sky of rolling grey rain clouds moving fast across a wide open view.",
    ],
    Theme.NATURAL_LANDSCAPE: [
        "A still alpine lake mirroring jagged snow-capped peaks under a calm morning light.",
        "Rolling green hills patterned with hedgerows and a winding stream in the valley below.",
        "Wind-carved red sandstone canyons glowing in warm evening light.",
        "Endless sand dunes with sharp crests and long shadows under a low sun.",
        "A rocky coastline where waves break against dark cliffs and sea spray hangs in the air.",
        "A broad river delta seen from above, silver channels threading through green marshland.",
        "A misty rainforest valley with layered ridges fading into the distance.",
        "A wide savanna plain dotted with lone acacia trees under a bright open sky.",
        "A volcanic plateau of black rock and green moss, with steam rising from distant vents.",
        "A glacier tongue spilling into a turquoise lagoon scattered with floating ice.",
    ],
}

_SUBJECTS = {
    Theme.SEASONAL: [
        "a spring cherry orchard", "a summer wheat field", "an autumn maple forest",
        "a winter spruce forest", "a spring wildflower meadow", "a summer lavender field",
        "an autumn vineyard", "a winter frozen lake", "a spring rice terrace",
        "a summer sunflower field", "an autumn oak woodland", "a snowy winter valley",
        "a spring tulip field", "a summer alpine pasture", "an autumn larch forest",
        "a frosted winter meadow", "a spring bamboo grove", "a summer coastal dune meadow",
        "an autumn aspen grove", "a winter birch forest", "a spring river meadow",
        "a summer poppy field", "an autumn pumpkin field", "a winter mountain pass",
    ],
    Theme.SKY: [
        "a sky full of cumulus clouds", "a clear blue sky", "a sky streaked with cirrus clouds",
        "a stormy sky", "a starry night sky", "a pastel sky", "a sky with an aurora",
        "an overcast sky", "a sky with towering thunderheads", "a sky with scattered altocumulus",
        "a sky lit by a full moon", "a sky with a thin crescent moon", "a hazy sky",
        "a sky of mackerel clouds", "a wide prairie sky", "a sky over the open ocean",
        "a sky with drifting rain curtains", "a sky with sun rays through clouds",
        "a sky with lenticular clouds", "a deep violet sky", "a sky with a double rainbow",
        "a sky with mammatus clouds", "a sky with wispy noctilucent clouds", "a high-altitude sky",
    ],
    Theme.NATURAL_LANDSCAPE: [
        "an alpine lake", "rolling green hills", "a red rock canyon", "desert sand dunes",
        "a rugged sea cliff coastline", "a river delta", "a rainforest valley", "a savanna plain",
        "a volcanic plateau", "a glacier lagoon", "a tundra plain", "a limestone karst valley",
        "a salt flat", "a fjord", "a pine-covered mountain ridge", "a wide grassland steppe",
        "a mangrove shoreline", "a high mountain plateau", "a marshy wetland",
        "a basalt column shoreline", "a wide river gorge", "a terraced hillside",
        "a rocky badlands basin", "a quiet forest clearing",
    ],
}

_TIMES = [
    "at dawn", "in early morning light", "at midday", "in the late afternoon",
    "at golden hour", "at sunset", "at dusk", "under twilight", "at night", "under moonlight",
]

_CONDITIONS = [
    "under clear skies", "with light fog", "after a rain shower", "with drifting mist",
    "on a windy day", "in soft overcast light", "under a light drizzle", "with scattered clouds",
    "during a gentle snowfall", "in hazy sunlight", "beneath a distant storm front",
    "with a faint rainbow", "in crisp dry air", "in humid haze", "with low clouds",
]

INSTRUCTION = (
    "Write {count} distinct prompts for a text-to-image model describing {topic}. "
    "Each prompt should depict an empty background scene with no people, animals or "
    "man-made objects in focus. Vary the time of day, the weather and the visual details. "
    "Return one prompt per line."
)

_TOPICS = {
    Theme.SEASONAL: "outdoor scenes in a specific season (spring, summer, autumn or winter)",
    Theme.SKY: "skies and atmospheric phenomena",
    Theme.NATURAL_LANDSCAPE: "natural landscapes",
}


def static_prompt(theme: Theme, i: int) -> str:
    """The ``i``-th prompt of the bundled corpus for ``theme``; distinct for every ``i``."""
    theme = Theme(theme)
    base = _BASE[theme]
    if i < len(base):
        return base[i]
    j = i - len(base)
    subjects = _SUBJECTS[theme]
    n_s, n_t, n_c = len(subjects), len(_TIMES), len(_CONDITIONS)
    span = n_s * n_t * n_c
    combo, lap = j % span, j // span
    s = subjects[combo % n_s]
    t = _TIMES[(combo // n_s) % n_t]
    c = _CONDITIONS[combo // (n_s * n_t)]
    text = f"A background photograph of {s} {t}, {c}, with no people or objects in view."
    text = text[0].upper() + text[1:]
    if lap:
        text = f"{text[:-1]}, variation {lap + 1}."
    return text


def corpus_capacity(theme: Theme) -> int:
    """Number of prompts available before the corpus falls back to numbered variations."""
    return len(_BASE[theme]) + len(_SUBJECTS[theme]) * len(_TIMES) * len(_CONDITIONS)


def expand_prompts(theme, count: int, expander: str = "static-corpus", *,
                   endpoint: str = None, offset: int = 0, timeout: float = 60.0) -> List[ThemePrompt]:
    """Return ``count`` distinct prompts for ``theme``.

    ``static-corpus`` walks the bundled corpus from ``offset``. ``llm-endpoint``
    POSTs ``{"instruction", "theme", "count"}`` JSON to ``endpoint`` and
    expects ``{"prompts": [...]}`` back.
    """
    theme = Theme(theme)
    if count < 1:
        raise ValueError("count must be >= 1")
    if expander == "static-corpus":
        return [ThemePrompt(theme, static_prompt(theme, offset + i)) for i in range(count)]
    if expander != "llm-endpoint":
        raise ValueError(f"unknown expander {expander!r}")
    if not endpoint:
        raise ValueError("llm-endpoint expander needs an endpoint URL")
    payload = {
        "instruction": INSTRUCTION.format(count=count, topic=_TOPICS[theme]),
        "theme": theme.value,
        "count": count,
    }
    try:
        resp = requests.post(endpoint, json=payload, timeout=timeout)
    except requests.exceptions.ConnectionError as exc:
        raise EndpointUnreachable(f"{endpoint}: {exc}") from exc
    if resp.status_code != 200:
        raise BackendFailure(f"{endpoint} returned HTTP {resp.status_code}")
    texts = []
    for text in resp.json().get("prompts", []):
        text = str(text).strip()
        if text and text not in texts:
            texts.append(text)
    if len(texts) < count:
        raise BackendFailure(f"{endpoint} returned {len(texts)} distinct prompts, asked for {count}")
    return [ThemePrompt(theme, t) for t in texts[:count]]
