"""Element data: symbols, valences, masses, and the configurable metal list.

All values are embedded constants so features are bit-reproducible across
environments; atomic masses are standard atomic weights (CIAAW 2021,
conventional values where an interval is published).
"""

from __future__ import annotations

# Atomic numbers for every element symbol the parser may meet. The supported
# organic set is much smaller; this table also covers metals so that salts
# like [Na+] parse and can then be stripped.
ATOMIC_NUMBERS = {
    "H": 1, "He": 2, "Li": 3, "Be": 4, "B": 5, "C": 6, "N": 7, "O": 8,
    "F": 9, "Ne": 10, "Na": 11, "Mg": 12, "Al": 13, "Si": 14, "P": 15,
    "S": 16, "Cl": 17, "Ar": 18, "K": 19, "Ca": 20, "Sc": 21, "Ti": 22,
    "V": 23, "Cr": 24, "Mn": 25, "Fe": 26, "Co": 27, "Ni": 28, "Cu": 29,
    "Zn": 30, "Ga": 31, "Ge": 32, "As": 33, "Se": 34, "Br": 35, "Kr": 36,
    "Rb": 37, "Sr": 38, "Y": 39, "Zr": 40, "Nb": 41, "Mo": 42, "Tc": 43,
    "Ru": 44, "Rh": 45, "Pd": 46, "Ag": 47, "Cd": 48, "In": 49, "Sn": 50,
    "Sb": 51, "Te": 52, "I": 53, "Xe": 54, "Cs": 55, "Ba": 56, "La": 57,
    "Hf": 72, "Ta": 73, "W": 74, "Re": 75, "Os": 76, "Ir": 77, "Pt": 78,
    "Au": 79, "Hg": 80, "Tl": 81, "Pb": 82, "Bi": 83,
}

SYMBOLS = {num: sym for sym, num in ATOMIC_NUMBERS.items()}

ATOMIC_MASSES = {
    1: 1.008, 2: 4.0026, 3: 6.94, 4: 9.0122, 5: 10.81, 6: 12.011,
    7: 14.007, 8: 15.999, 9: 18.998, 10: 20.180, 11: 22.990, 12: 24.305,
    13: 26.982, 14: 28.085, 15: 30.974, 16: 32.06, 17: 35.45, 18: 39.95,
    19: 39.098, 20: 40.078, 21: 44.956, 22: 47.867, 23: 50.942, 24: 51.996,
    25: 54.938, 26: 55.845, 27: 58.933, 28: 58.693, 29: 63.546, 30: 65.38,
    31: 69.723, 32: 72.630, 33: 74.922, 34: 78.971, 35: 79.904, 36: 83.798,
    37: 85.468, 38: 87.62, 39: 88.906, 40: 91.224, 41: 92.906, 42: 95.95,
    43: 97.0, 44: 101.07, 45: 102.91, 46: 106.42, 47: 107.87, 48: 112.41,
    49: 114.82, 50: 118.71, 51: 121.76, 52: 127.60, 53: 126.90, 54: 131.29,
    55: 132.91, 56: 137.33, 57: 138.91, 72: 178.49, 73: 180.95, 74: 183.84,
    75: 186.21, 76: 190.23, 77: 192.22, 78: 195.08, 79: 196.97, 80: 200.59,
    81: 204.38, 82: 207.2, 83: 208.98,
}

# Non-metal set accepted in molecular graphs after preprocessing. Everything
# outside this set and the metal list is rejected at parse time.
ORGANIC_ELEMENTS = frozenset(
    ATOMIC_NUMBERS[s]
    for s in ("H", "B", "C", "N", "O", "F", "Si", "P", "S", "Cl", "Br", "I",
              "Se", "As", "Te", "Ge", "Sb")
)

# Alkali / alkaline-earth plus transition-metal blocks and post-transition
# metals; stripped by preprocessing. Overridable per run.
DEFAULT_METALS = frozenset(
    [3, 4, 11, 12, 13, 19, 20, 37, 38, 55, 56, 57]
    + list(range(21, 31))          # Sc..Zn
    + list(range(39, 49))          # Y..Cd
    + list(range(72, 81))          # Hf..Hg
    + [31, 49, 50, 81, 82, 83]     # Ga, In, Sn, Tl, Pb, Bi
)

# Allowed total valences for neutral atoms; used for implicit hydrogen
# counts on organic-subset atoms and by the valence sanity property.
STANDARD_VALENCES = {
    1: (1,), 5: (3,), 6: (4,), 7: (3,), 8: (2,), 9: (1,),
    14: (4,), 15: (3, 5), 16: (2, 4, 6), 17: (1,), 35: (1,), 53: (1,),
    34: (2, 4, 6), 33: (3, 5), 52: (2,), 32: (4,), 51: (3, 5),
}

# Elements that may be written bare (organic subset) in SMILES.
ORGANIC_SUBSET_SYMBOLS = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_SUBSET_SYMBOLS = ("b", "c", "n", "o", "p", "s", "se", "as")


def symbol_for(element: int) -> str:
    return SYMBOLS.get(element, f"#{element}")


def mass_of(element: int) -> float:
    try:
        return ATOMIC_MASSES[element]
    except KeyError:
        raise KeyError(f"no standard atomic weight for element {element}")
