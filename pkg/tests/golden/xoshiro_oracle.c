/* Independent C reference for the xoshiro256** golden vectors (stdout)
   and the published splitmix64 / fnv1a check values (stderr). */
#include <stdio.h>
#include <stdint.h>
static uint64_t sm;
static uint64_t splitmix64(void){uint64_t z=(sm+=0x9e3779b97f4a7c15ULL);z=(z^(z>>30))*0xbf58476d1ce4e5b9ULL;z=(z^(z>>27))*0x94d049bb133111ebULL;return z^(z>>31);}
static inline uint64_t rotl(const uint64_t x,int k){return (x<<k)|(x>>(64-k));}
static uint64_t s[4];
uint64_t next(void){const uint64_t result=rotl(s[1]*5,7)*9;const uint64_t t=s[1]<<17;s[2]^=s[0];s[3]^=s[1];s[1]^=s[2];s[0]^=s[3];s[2]^=t;s[3]=rotl(s[3],45);return result;}
int main(int argc,char**argv){
  sm=0x0123456789ABCDEFULL; for(int i=0;i<4;i++) s[i]=splitmix64();
  for(int i=0;i<64;i++) printf("%016llx\n",(unsigned long long)next());
  /* fnv1a of "owner-key\0edges" */
  const char key[]="owner-key\0edges"; uint64_t h=0xcbf29ce484222325ULL;
  for(int i=0;i<15;i++){h^=(unsigned char)key[i];h*=0x100000001b3ULL;}
  fprintf(stderr,"fnv %016llx\n",(unsigned long long)h);
  s[0]=1;s[1]=2;s[2]=3;s[3]=4; for(int i=0;i<4;i++) fprintf(stderr,"%llu\n",(unsigned long long)next());
  sm=1234567; for(int i=0;i<3;i++) fprintf(stderr,"sm %llu\n",(unsigned long long)splitmix64());
}
