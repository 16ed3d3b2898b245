// nondeterministic guard: may exit at any time
int x;
x = 0;
while (unknown()) {
  x = x + 2;
}
assert(x >= 0);
