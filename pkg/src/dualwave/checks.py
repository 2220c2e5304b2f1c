"""Pass/fail records shared by the verification surfaces."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass
class PropertyCheck:
    name: str
    passed: bool
    worst_slack: float
    applicable: bool = True
    detail: str = ""


@dataclass
class PropertyReport:
    checks: list[PropertyCheck]
    estimates: dict[str, float]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.applicable)

    def __getitem__(self, name: str) -> PropertyCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            status = "n/a" if not c.applicable else ("PASS" if c.passed else "FAIL")
            out.append(f"{c.name:<24} {status:<5} worst_slack={c.worst_slack:.3e} {c.detail}".rstrip())
        for k, v in self.estimates.items():
            out.append(f"{k:<24} {v:.12g}")
        return out

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [asdict(c) for c in self.checks],
            "estimates": dict(self.estimates),
        }
