// Calculational proofs. Each step relates two expressions with an operator
// and may carry a hint in braces (lemma calls or assertions) justifying it.

function Sum(n: nat): nat {
  if n == 0 then 0 else n + Sum(n - 1)
}

lemma SumFormula(n: nat)
  ensures 2 * Sum(n) == n * (n + 1)
{
  if n > 0 {
    calc {
      2 * Sum(n);
    ==
      2 * (n + Sum(n - 1));
    ==
      2 * n + 2 * Sum(n - 1);
    ==  { SumFormula(n - 1); }
      2 * n + (n - 1) * n;
    ==
      n * (n + 1);
    }
  }
}

lemma DistributeMul(p: int, a: int, b: int)
  ensures p * (a + b) == p * a + p * b
{
}

lemma MultipleOfSum(p: int, x: int, y: int, a: int, b: int)
  requires x == p * a && y == p * b
  ensures x + y == p * (a + b)
{
  calc {
    x + y;
  ==  { assert x == p * a; assert y == p * b; }
    p * a + p * b;
  ==  { DistributeMul(p, a, b); }
    p * (a + b);
  }
}

function Pow(b: int, e: nat): int {
  if e == 0 then 1 else b * Pow(b, e - 1)
}

lemma PowAdd(b: int, e1: nat, e2: nat)
  ensures Pow(b, e1 + e2) == Pow(b, e1) * Pow(b, e2)
{
  if e1 > 0 {
    calc {
      Pow(b, e1 + e2);
    ==
      b * Pow(b, e1 - 1 + e2);
    ==  { PowAdd(b, e1 - 1, e2); }
      b * (Pow(b, e1 - 1) * Pow(b, e2));
    ==
      Pow(b, e1) * Pow(b, e2);
    }
  }
}

lemma Monotonic(x: int, y: int, z: int)
  requires x <= y && z >= 0
  ensures x * z <= y * z
{
  calc {
    x * z;
  <=  { assert (y - x) * z >= 0; }
    y * z;
  }
}
