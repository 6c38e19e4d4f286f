method Fill(a: array<int>, v: int)
  modifies a
  ensures forall i :: 0 <= i < a.Length ==> a[i] == v
{
  var k := 0;
  while k < a.Length
    invariant 0 <= k <= a.Length
  {
    a[k] := v;
    k := k + 1;
  }
}
