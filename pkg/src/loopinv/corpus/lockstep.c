// two variables advance in lockstep
int a;
int b;
a = 0;
b = 0;
while (a < 8) {
  a = a + 1;
  b = b + 1;
}
assert(a == b);
