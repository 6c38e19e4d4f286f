method CountEven(a: array<int>) returns (count: nat)
  ensures count <= a.Length
{
  count := 0;
  var i := 0;
  while i < a.Length
    invariant 0 <= i < a.Length
    invariant count <= i
  {
    if a[i] % 2 == 0 {
      count := count + 1;
    }
    i := i + 1;
  }
}
