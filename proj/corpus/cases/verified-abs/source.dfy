function Abs(x: int): nat {
  if x < 0 then -x else x
}

method AbsAll(a: array<int>)
  modifies a
  ensures forall i :: 0 <= i < a.Length ==> a[i] == Abs(old(a[i]))
{
  var k := 0;
  while k < a.Length
    invariant 0 <= k <= a.Length
    invariant forall i :: 0 <= i < k ==> a[i] == Abs(old(a[i]))
    invariant forall i :: k <= i < a.Length ==> a[i] == old(a[i])
  {
    a[k] := Abs(a[k]);
    k := k + 1;
  }
}
