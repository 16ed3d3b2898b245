// steps of two: the equality postcondition needs a parity fact, which is
// outside any conjunctive linear atom pool
int x;
x = 0;
while (x < 10) {
  x = x + 2;
}
assert(x == 10);
