"""Hand-rolled reference values for the bound, market and settlement formulas.

Uses Python's exact integers and decimal arithmetic only; shares no code
with the C++ implementation. Output is frozen into the unit tests.
"""
from decimal import Decimal, getcontext

getcontext().prec = 50

# Thermodynamic bound with |beta| * (T_ref - T_used) thermal factor.
def p_max(area, eff, g, beta, t_ref, t_used):
    return area * eff * g * (1 + abs(beta) * (t_ref - t_used))

print("p_max cool   :", p_max(43.39, 0.2055, 929, -0.00379, 25, 20))
print("p_max ref    :", p_max(43.39, 0.2055, 929, -0.00379, 25, 25))

# Clear-sky ceiling.
print("clear 90     :", 1361 * 0.75 * 1.0)
print("clear 30     :", 1361 * 0.75 * 0.5)

# Ledger integer formulas (truncating, textual order).
def reward_wei(u):
    return (u * 25 // 100) * 10**18 // 100000

def cost_wei(e):
    return e * 10**18 // 100000

print("reward 1000  :", reward_wei(1000))
print("pool 1000    :", 1000 * 75 // 100)
print("cost 100000  :", cost_wei(100000))
print("reward 7     :", reward_wei(7))
print("cost 1       :", cost_wei(1))

# Slippage reference trade size from (L=0.0957, s=1.91%).
L, s = Decimal("0.0957"), Decimal("0.0191")
q = s * L / (1 - s)
print("slippage q   :", q)
print("slip(0.0957, 0.001864):", Decimal("0.001864") / (Decimal("0.0957") + Decimal("0.001864")) * 100)

# Exergy quality factor calibration.
print("exergy qf    :", Decimal("65.75") / (Decimal("0.6690") * 3600))
print("exergy agg   :", Decimal("0.6690") * 3600 * Decimal("0.0273"))

# Capacity factors.
for city, cap, ver in [("Beijing", 84.58, 427.72), ("Chengdu", 92.62, 220.95),
                       ("Hangzhou", 79.14, 539.39), ("Shanghai", 84.12, 554.34),
                       ("Shenzhen", 72.77, 285.73)]:
    print(f"cf {city:9s}:", ver / (cap * 24) * 100)

print("inflation    :", 141.59 / 2028.13 * 100)
print("area const   :", 24 * 0.0957)

# Residual stats on a hand set.
pairs = [(900.0, 1000.0), (450.0, 500.0)]
ratios = [p / m for p, m in pairs]
print("mean ratio   :", sum(ratios) / len(ratios))

# Liquidity example.
print("liq 0.004729 :", 0.018 + 0.75 * 0.004729)
