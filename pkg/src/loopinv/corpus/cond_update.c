// conditional update saturating at a cap
int x;
int y;
x = 0;
y = 0;
while (x < 10) {
  if (y < 5) {
    y = y + 1;
  }
  x = x + 1;
}
assert(y <= 5);
