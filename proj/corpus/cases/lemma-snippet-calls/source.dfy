function Count(s: seq<int>, v: int): nat {
  if |s| == 0 then 0 else (if s[0] == v then 1 else 0) + Count(s[1..], v)
}

method CountLoop(s: seq<int>, v: int) returns (c: nat)
  ensures c == Count(s, v)
{
  c := 0;
  var i := 0;
  while i < |s|
    invariant 0 <= i <= |s|
    invariant c == Count(s[..i], v)
  {
    if s[i] == v {
      c := c + 1;
    }
    i := i + 1;
  }
  assert s[..i] == s;
}
