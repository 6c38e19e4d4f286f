method Scale(x: int) returns (y: int)
  requires x > 0
  ensures y > x
{
  y := x * 2;
  assert y >= 2;
  assert y % 4 == 0;
}

method Twice(x: nat) returns (y: nat)
  ensures y == x + x
{
  y := x * 3;
}
