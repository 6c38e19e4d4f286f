function Pow2(n: nat): nat {
  if n == 0 then 1 else 2 * Pow2(n - 1)
}

lemma Pow2Positive(n: nat)
  ensures Pow2(n) >= 1
{
}

lemma Pow2Monotonic(m: nat, n: nat)
  requires m <= n
  ensures Pow2(m) <= Pow2(n)
{
}
